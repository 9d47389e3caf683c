"""Fermi contact and dipolar hyperfine couplings from a spin-density grid.

All returned couplings are in MHz. The contact term is
``(8 pi / 3) g_e mu_e g_l mu_N rho_s(R)`` and the dipolar tensor is the
``(3 r_i r_j - r^2 delta_ij) / r^5`` kernel integrated against the density,
with the same magneton prefactor.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constants import CONSTANTS, Isotope, coupling_prefactor, thomson_radius
from .radial import (DEFAULT_ANGULAR_ORDER, LogRadialGrid, extrapolate_to_nucleus,
                     spherical_average, thomson_average)
from .volumetric import AtomSite, OutOfDomainError, SpinDensityGrid, index_coordinates, trilinear_sample

CONTACT_MODES = ("grid_interp", "radial_extrapolate", "thomson")
DEFAULT_CONTACT_MODE = "radial_extrapolate"

# planes of the first grid axis per reduction chunk; fixed so the summation
# order does not depend on the thread count
SLAB = 8


class SpinZeroIsotopeError(ValueError):
    pass


class CutoffTooLargeError(ValueError):
    pass


class TensorValidationError(ValueError):
    pass


def _check_isotope(isotope: Isotope):
    if isotope.spin <= 0:
        raise SpinZeroIsotopeError(f"{isotope.name} has nuclear spin 0 and no hyperfine coupling")


def contact_prefactor(isotope: Isotope, constants=CONSTANTS) -> float:
    """MHz per (electron / bohr^3) of spin density at the nucleus."""
    return 8.0 * np.pi / 3.0 * coupling_prefactor(isotope.g_factor, constants)


def density_at_nucleus(grid: SpinDensityGrid, nucleus: AtomSite, mode: str = DEFAULT_CONTACT_MODE,
                       rgrid: LogRadialGrid | None = None,
                       angular_order: int = DEFAULT_ANGULAR_ORDER,
                       extrapolation: str = "quadratic") -> float:
    if mode not in CONTACT_MODES:
        raise ValueError(f"unknown contact mode {mode!r}; expected one of {CONTACT_MODES}")
    R = nucleus.position
    if not grid.cell.periodic:
        u = index_coordinates(grid, R)[0]
        if np.any(u < 0) or np.any(u > np.array(grid.dims) - 1):
            raise OutOfDomainError("nucleus lies outside the non-periodic grid")
    if mode == "grid_interp":
        return trilinear_sample(grid, R)
    profile = spherical_average(grid, R, rgrid, angular_order)
    if mode == "radial_extrapolate":
        return extrapolate_to_nucleus(profile, extrapolation)
    return thomson_average(profile, thomson_radius(nucleus.Z), extrapolation)


def fermi_contact(grid: SpinDensityGrid, nucleus: AtomSite, isotope: Isotope,
                  mode: str = DEFAULT_CONTACT_MODE, rgrid: LogRadialGrid | None = None,
                  angular_order: int = DEFAULT_ANGULAR_ORDER,
                  extrapolation: str = "quadratic") -> float:
    """Isotropic (Fermi contact) coupling in MHz.

    ``mode`` selects how the density at the nucleus is estimated:
    ``grid_interp`` (trilinear value), ``radial_extrapolate`` (spherical
    average extrapolated to r = 0) or ``thomson`` (average over the Thomson
    sphere of the nucleus).
    """
    _check_isotope(isotope)
    rho = density_at_nucleus(grid, nucleus, mode, rgrid, angular_order, extrapolation)
    return contact_prefactor(isotope) * rho


def default_epsilon(grid: SpinDensityGrid) -> float:
    """Half the longest voxel diagonal."""
    h = grid.steps
    diags = [h[0] + h[1] + h[2], h[0] + h[1] - h[2], h[0] - h[1] + h[2], -h[0] + h[1] + h[2]]
    return 0.5 * max(float(np.linalg.norm(d)) for d in diags)


def default_cutoff(grid: SpinDensityGrid) -> float:
    return 0.5 * float(grid.cell.widths.min()) if grid.cell.periodic else np.inf


def dipolar_kernel_sum(grid: SpinDensityGrid, center, epsilon: float, cutoff: float,
                       threads: int | None = None):
    """Raw (un-prefactored) dipolar integral around ``center`` in atomic units.

    Returns the symmetric 3x3 matrix and the spin contained in the excluded
    sphere ``r <= epsilon``.
    """
    values = grid.values
    step = np.ascontiguousarray(grid.steps)
    cell = np.ascontiguousarray(grid.cell.vectors)
    inv_cell = np.ascontiguousarray(np.linalg.inv(cell))
    offset = np.ascontiguousarray(grid.origin - np.asarray(center, dtype=float))
    periodic = bool(grid.cell.periodic)
    cut = float(cutoff) if np.isfinite(cutoff) else np.inf
    n1 = grid.dims[0]
    chunks = [(i, min(i + SLAB, n1)) for i in range(0, n1, SLAB)]

    def work(chunk):
        return kernels.dipolar_slab(values, step, offset, periodic, cell, inv_cell,
                                    float(epsilon), cut, chunk[0], chunk[1])

    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    s = np.zeros(6)
    excluded = 0.0
    for sums, exc in parts:  # fixed order
        s += sums
        excluded += exc
    xx, yy, zz, xy, xz, yz = s * grid.voxel_volume
    mat = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
    return mat, excluded * grid.voxel_volume


def dipolar_tensor(grid: SpinDensityGrid, nucleus: AtomSite, isotope: Isotope,
                   cutoff: float | None = None, epsilon: float | None = None,
                   threads: int | None = None, full_output: bool = False):
    """Dipolar hyperfine tensor in MHz, symmetric and traceless.

    Voxels closer than ``epsilon`` to the nucleus are skipped (the spherical
    near field contributes nothing). For periodic cells displacements use
    the minimum image and ``cutoff`` may not exceed half the smallest cell
    width. With ``full_output`` a dict of diagnostics is returned as well
    (raw trace before de-tracing, excluded spin, epsilon, cutoff).
    """
    _check_isotope(isotope)
    eps = default_epsilon(grid) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    limit = default_cutoff(grid)
    cut = limit if cutoff is None else float(cutoff)
    if grid.cell.periodic and cut > limit * (1 + 1e-12):
        raise CutoffTooLargeError(
            f"cutoff {cut:.6g} bohr exceeds half the smallest cell width ({limit:.6g} bohr)")
    raw, excluded = dipolar_kernel_sum(grid, nucleus.position, eps, cut, threads)
    raw = coupling_prefactor(isotope.g_factor) * raw
    raw = 0.5 * (raw + raw.T)
    trace = float(np.trace(raw))
    b = raw - trace / 3.0 * np.eye(3)
    if full_output:
        info = {"raw_trace": trace, "excluded_spin": excluded, "epsilon": eps, "cutoff": cut}
        return b, info
    return b


def principal_values(b) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and a right-handed matrix of column eigenvectors."""
    b = np.asarray(b, dtype=float)
    w, v = np.linalg.eigh(0.5 * (b + b.T))
    if np.linalg.det(v) < 0:
        v[:, 2] *= -1
    return w, v


def isotropic_from_tensor(A) -> float:
    return float(np.trace(np.asarray(A, dtype=float)) / 3.0)


@dataclass(frozen=True, eq=False)
class HyperfineTensor:
    fermi_contact: float
    dipolar: np.ndarray
    principal_values: np.ndarray
    principal_axes: np.ndarray
    nucleus: AtomSite | None = None
    isotope: Isotope | None = None
    raw_trace: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def full(self) -> np.ndarray:
        """A_ij = a delta_ij + b_ij."""
        return self.fermi_contact * np.eye(3) + self.dipolar

    def isotropic_part(self) -> float:
        return isotropic_from_tensor(self.full)

    @property
    def epr_principal_values(self) -> np.ndarray:
        """Principal values ordered by increasing magnitude (|b_xx| <= |b_yy| <= |b_zz|)."""
        pv = self.principal_values
        return pv[np.argsort(np.abs(pv), kind="stable")]

    def record(self, nucleus_index=None) -> dict:
        """Flat record for structured output."""
        rec = {
            "nucleus_index": nucleus_index,
            "isotope": self.isotope.name if self.isotope else None,
            "a_MHz": self.fermi_contact,
            "b_matrix_MHz": self.dipolar.reshape(-1).tolist(),
            "principal_values_MHz": self.principal_values.tolist(),
            "principal_axes": self.principal_axes.reshape(-1).tolist(),
        }
        rec.update(self.meta)
        return rec


def assemble_tensor(a: float, b, nucleus: AtomSite | None = None, isotope: Isotope | None = None,
                    sym_tol: float = 1e-9, trace_tol: float = 0.15, **meta) -> HyperfineTensor:
    """Build a :class:`HyperfineTensor` from a contact term and a dipolar matrix.

    ``b`` must be symmetric within ``sym_tol`` and traceless within
    ``trace_tol`` MHz; the default admits published principal values rounded
    to 0.1 MHz. The stored dipolar part is projected onto the traceless
    subspace and the removed trace is kept in ``raw_trace``.
    """
    b = np.array(b, dtype=float)
    if b.shape != (3, 3):
        raise TensorValidationError("dipolar tensor must be 3x3")
    if np.max(np.abs(b - b.T)) > sym_tol:
        raise TensorValidationError("dipolar tensor is not symmetric")
    tr = float(np.trace(b))
    if abs(tr) > trace_tol:
        raise TensorValidationError(f"dipolar tensor trace {tr:.6g} MHz exceeds {trace_tol} MHz")
    b = 0.5 * (b + b.T) - tr / 3.0 * np.eye(3)
    w, v = principal_values(b)
    return HyperfineTensor(float(a), b, w, v, nucleus, isotope, tr, dict(meta))


def compute_tensor(grid: SpinDensityGrid, nucleus: AtomSite, isotope: Isotope,
                   mode: str = DEFAULT_CONTACT_MODE, cutoff: float | None = None,
                   epsilon: float | None = None, rgrid: LogRadialGrid | None = None,
                   angular_order: int = DEFAULT_ANGULAR_ORDER, extrapolation: str = "quadratic",
                   threads: int | None = None) -> HyperfineTensor:
    """Contact term plus dipolar tensor for one nucleus."""
    a = fermi_contact(grid, nucleus, isotope, mode, rgrid, angular_order, extrapolation)
    b, info = dipolar_tensor(grid, nucleus, isotope, cutoff, epsilon, threads, full_output=True)
    return assemble_tensor(a, b, nucleus, isotope, trace_tol=np.inf, mode=mode,
                           epsilon=info["epsilon"], cutoff=info["cutoff"],
                           raw_trace=info["raw_trace"], excluded_spin=info["excluded_spin"])
