"""Volumetric spin-density grids and the Gaussian cube format.

Internal layout is row-major over (n1, n2, n3): node ``(i, j, k)`` sits at
``origin + i*a1/n1 + j*a2/n2 + k*a3/n3`` where ``a1, a2, a3`` are the rows of
the cell matrix. Lengths are bohr and densities electrons/bohr^3.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import kernels
from .constants import element_symbol

BOHR_PER_ANGSTROM = 1.0 / 0.529177210903


@dataclass(frozen=True)
class Cell:
    vectors: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        vec = np.array(self.vectors, dtype=float).reshape(3, 3)
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        if not np.linalg.det(vec) > 0:
            raise ValueError("cell vectors must be right-handed with positive volume")

    @property
    def volume(self) -> float:
        return float(np.linalg.det(self.vectors))

    @property
    def widths(self) -> np.ndarray:
        """Perpendicular distance between opposite faces along each axis."""
        recip = np.linalg.inv(self.vectors).T
        return 1.0 / np.linalg.norm(recip, axis=1)

    @classmethod
    def cubic(cls, length: float, periodic: bool = True) -> "Cell":
        return cls(np.eye(3) * length, periodic)


@dataclass(frozen=True)
class AtomSite:
    Z: int
    position: np.ndarray
    label: str | None = None

    def __post_init__(self):
        pos = np.array(self.position, dtype=float).reshape(3)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True, eq=False)
class SpinDensityGrid:
    cell: Cell
    values: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    atoms: tuple[AtomSite, ...] = ()

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise ValueError("values must be a 3-D array with positive dimensions")
        if not np.all(np.isfinite(vals)):
            raise ValueError("spin density contains non-finite values")
        vals.setflags(write=False)
        org = np.array(self.origin, dtype=float).reshape(3)
        org.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", org)
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def steps(self) -> np.ndarray:
        """Grid step vectors, one per row."""
        return self.cell.vectors / np.array(self.dims)[:, None]

    @property
    def voxel_volume(self) -> float:
        return self.cell.volume / self.values.size

    def node_positions(self) -> np.ndarray:
        """Cartesian coordinates of every node, shape (n1, n2, n3, 3)."""
        idx = np.indices(self.dims, dtype=float)
        return self.origin + np.einsum("aijk,ab->ijkb", idx, self.steps)

    def with_values(self, values) -> "SpinDensityGrid":
        return SpinDensityGrid(self.cell, values, self.origin, self.atoms)

    def __add__(self, other: "SpinDensityGrid") -> "SpinDensityGrid":
        if self.dims != other.dims or not np.allclose(self.cell.vectors, other.cell.vectors):
            raise ValueError("grids are not commensurate")
        return self.with_values(self.values + other.values)

    def __mul__(self, factor: float) -> "SpinDensityGrid":
        return self.with_values(self.values * factor)

    __rmul__ = __mul__


class TailTruncationWarning(UserWarning):
    """Gaussian density not negligible at the cell boundary."""


class OutOfDomainError(ValueError):
    pass


def minimum_image(displacements: np.ndarray, cell: Cell) -> np.ndarray:
    """Wrap displacement vectors (..., 3) to the nearest periodic image."""
    frac = displacements @ np.linalg.inv(cell.vectors)
    frac -= np.round(frac)
    return frac @ cell.vectors


def integrate(grid: SpinDensityGrid) -> float:
    """Total spin: sum of node values times the voxel volume."""
    return float(grid.values.sum() * grid.voxel_volume)


def index_coordinates(grid: SpinDensityGrid, points) -> np.ndarray:
    """Continuous node-index coordinates of cartesian points, shape (m, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return (pts - grid.origin) @ np.linalg.inv(grid.steps)


def trilinear_sample(grid: SpinDensityGrid, points) -> np.ndarray | float:
    """Trilinearly interpolated density at one point (3,) or many (m, 3).

    Periodic grids wrap; non-periodic grids accept only points inside the
    hull of the nodes.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    u = index_coordinates(grid, pts)
    if not grid.cell.periodic:
        upper = np.array(grid.dims) - 1
        tol = 1e-9
        if np.any(u < -tol) or np.any(u > upper + tol):
            raise OutOfDomainError("point outside non-periodic grid domain")
        u = np.clip(u, 0, upper)
    out = kernels.trilinear(grid.values, u, grid.cell.periodic)
    return float(out[0]) if single else out


def synth_gaussian(center, sigma: float, total_spin: float, cell: Cell,
                   dims: Sequence[int], origin=(0.0, 0.0, 0.0),
                   atoms: Sequence[AtomSite] = ()) -> SpinDensityGrid:
    """Sample ``total_spin * exp(-|r - c|^2 / sigma^2) / (pi^1.5 sigma^3)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    center = np.asarray(center, dtype=float)
    origin = np.asarray(origin, dtype=float)
    dims = tuple(int(n) for n in dims)
    empty = SpinDensityGrid(cell, np.zeros(dims), origin, atoms)
    d = empty.node_positions() - center
    if cell.periodic:
        d = minimum_image(d, cell)
        margin = 0.5 * cell.widths.min()
    else:
        frac = (center - origin) @ np.linalg.inv(cell.vectors)
        margin = float(np.min(np.minimum(frac, 1 - frac) * cell.widths))
    if margin <= 0 or np.exp(-(margin / sigma) ** 2) >= 1e-12:
        warnings.warn(
            f"Gaussian tail at the cell boundary exceeds 1e-12 of the peak "
            f"(sigma={sigma}, clearance={margin:.4g} bohr)",
            TailTruncationWarning, stacklevel=2)
    r2 = np.einsum("...i,...i->...", d, d)
    values = total_spin * np.exp(-r2 / sigma ** 2) / (np.pi ** 1.5 * sigma ** 3)
    return empty.with_values(values)


# -- cube format ------------------------------------------------------------

class CubeFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeaderError(CubeFormatError):
    pass


class ValueCountMismatchError(CubeFormatError):
    pass


class UnsupportedOrbitalCubeError(CubeFormatError):
    pass


def _fields(line, lineno, count, kinds):
    parts = line.split()
    if len(parts) < count:
        raise MalformedHeaderError(f"expected {count} fields, got {len(parts)}", lineno)
    try:
        return [k(p) for k, p in zip(kinds, parts[:count])]
    except ValueError as exc:
        raise MalformedHeaderError(str(exc), lineno) from None


def parse_cube(stream: IO | bytes | str, periodic: bool | None = None) -> SpinDensityGrid:
    """Read a Gaussian cube volume.

    ``periodic`` defaults to the ``PERIODIC``/``NONPERIODIC`` token written by
    :func:`write_cube` in the second comment line, and to periodic otherwise.
    """
    if isinstance(stream, (bytes, str)):
        text = stream.decode() if isinstance(stream, bytes) else stream
    else:
        text = stream.read()
        if isinstance(text, bytes):
            text = text.decode()
    lines = text.splitlines()
    if len(lines) < 6:
        raise MalformedHeaderError("file too short for a cube header", len(lines) + 1)

    if periodic is None:
        tokens = lines[1].split()
        periodic = "NONPERIODIC" not in tokens

    natoms, ox, oy, oz = _fields(lines[2], 3, 4, (int, float, float, float))
    counts, axes = [], []
    for a in range(3):
        n, x, y, z = _fields(lines[3 + a], 4 + a, 4, (int, float, float, float))
        if n == 0:
            raise MalformedHeaderError("voxel count must be non-zero", 4 + a)
        counts.append(n)
        axes.append((x, y, z))
    angstrom = any(n < 0 for n in counts)
    scale = BOHR_PER_ANGSTROM if angstrom else 1.0
    dims = tuple(abs(n) for n in counts)
    steps = np.array(axes) * scale
    origin = np.array([ox, oy, oz]) * scale

    atoms = []
    pos = 6
    for a in range(abs(natoms)):
        if pos >= len(lines):
            raise MalformedHeaderError("missing atom line", pos + 1)
        Z, _charge, x, y, z = _fields(lines[pos], pos + 1, 5, (int, float, float, float, float))
        label = f"{element_symbol(Z)}{a + 1}" if 1 <= Z <= 36 else f"X{a + 1}"
        atoms.append(AtomSite(Z, np.array([x, y, z]) * scale, label))
        pos += 1

    if natoms < 0:
        if pos >= len(lines):
            raise MalformedHeaderError("missing orbital index line", pos + 1)
        parts = lines[pos].split()
        try:
            norb = int(parts[0])
        except (IndexError, ValueError):
            raise MalformedHeaderError("bad orbital index line", pos + 1) from None
        if norb != 1:
            raise UnsupportedOrbitalCubeError(f"multi-orbital cube ({norb} orbitals)", pos + 1)
        # the orbital line may wrap; skip its remaining indices
        seen = len(parts) - 1
        pos += 1
        while seen < norb and pos < len(lines):
            seen += len(lines[pos].split())
            pos += 1

    expected = dims[0] * dims[1] * dims[2]
    try:
        values = np.array(" ".join(lines[pos:]).split(), dtype=float)
    except ValueError as exc:
        raise CubeFormatError(f"non-numeric volumetric value ({exc})", pos + 1) from None
    if values.size != expected:
        raise ValueCountMismatchError(
            f"expected {expected} values, found {values.size}", len(lines))

    cell = Cell(steps * np.array(dims)[:, None], periodic=periodic)
    return SpinDensityGrid(cell, values.reshape(dims), origin, atoms)


def read_cube(path, periodic: bool | None = None) -> SpinDensityGrid:
    with open(path, "rb") as fh:
        return parse_cube(fh, periodic)


def write_cube(grid: SpinDensityGrid, sink: IO, comment: str = "spin density") -> None:
    """Write ``grid`` as a cube file (bohr, 17 significant digits)."""
    out = io.StringIO()
    tag = "PERIODIC" if grid.cell.periodic else "NONPERIODIC"
    out.write(comment.replace("\n", " ") + "\n")
    out.write(f"{tag} last axis fastest\n")
    fmt = "{:.16e}".format
    o = grid.origin
    out.write(f"{len(grid.atoms):5d} {fmt(o[0])} {fmt(o[1])} {fmt(o[2])}\n")
    for n, s in zip(grid.dims, grid.steps):
        out.write(f"{n:5d} {fmt(s[0])} {fmt(s[1])} {fmt(s[2])}\n")
    for atom in grid.atoms:
        p = atom.position
        out.write(f"{atom.Z:5d} {fmt(float(atom.Z))} {fmt(p[0])} {fmt(p[1])} {fmt(p[2])}\n")
    flat = grid.values.reshape(grid.dims[0] * grid.dims[1], grid.dims[2])
    for row in flat:
        for start in range(0, len(row), 6):
            out.write(" ".join(fmt(v) for v in row[start:start + 6]) + "\n")
    data = out.getvalue()
    try:
        sink.write(data)
    except TypeError:
        sink.write(data.encode())


def save_cube(grid: SpinDensityGrid, path, comment: str = "spin density") -> None:
    with open(path, "w") as fh:
        write_cube(grid, fh, comment)
