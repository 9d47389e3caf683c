"""Logarithmic radial grids, spherical averages around a nucleus, and the
near-nucleus estimates built on them (extrapolation to r = 0 and the
Thomson-sphere volume average)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import lebedev_rule

from .volumetric import OutOfDomainError, SpinDensityGrid, index_coordinates, trilinear_sample

DEFAULT_RMIN = 1e-4
DEFAULT_RMAX = 5.0
DEFAULT_NPOINTS = 1000
DEFAULT_ANGULAR_ORDER = 17


class RadiusExceedsDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LogRadialGrid:
    r_min: float = DEFAULT_RMIN
    r_max: float = DEFAULT_RMAX
    n_points: int = DEFAULT_NPOINTS

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.n_points < 3:
            raise ValueError("need at least 3 radial points")

    @property
    def nodes(self) -> np.ndarray:
        i = np.arange(self.n_points)
        return self.r_min * (self.r_max / self.r_min) ** (i / (self.n_points - 1))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: LogRadialGrid
    center: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError("profile length does not match the radial grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def radii(self) -> np.ndarray:
        return self.grid.nodes

    def to_csv(self, sink) -> None:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["r_bohr", "density"])
        for r, v in zip(self.radii, self.values):
            w.writerow([repr(float(r)), repr(float(v))])


@lru_cache(maxsize=None)
def angular_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Lebedev nodes (m, 3) and weights normalized to sum to one."""
    try:
        xyz, w = lebedev_rule(order)
    except (ValueError, NotImplementedError):
        raise ValueError(f"no Lebedev rule of order {order}") from None
    xyz = np.ascontiguousarray(xyz.T)
    w = w / w.sum()
    xyz.setflags(write=False)
    w.setflags(write=False)
    return xyz, w


def spherical_average(grid: SpinDensityGrid, center, rgrid: LogRadialGrid | None = None,
                      angular_order: int = DEFAULT_ANGULAR_ORDER) -> RadialProfile:
    """Angular average of the trilinearly interpolated density on spheres of
    each radius of ``rgrid`` around ``center``."""
    rgrid = rgrid or LogRadialGrid()
    center = np.asarray(center, dtype=float)
    dirs, w = angular_rule(angular_order)
    r = rgrid.nodes
    pts = center + r[:, None, None] * dirs[None, :, :]
    pts = pts.reshape(-1, 3)
    if not grid.cell.periodic:
        u = index_coordinates(grid, pts)
        upper = np.array(grid.dims) - 1
        if np.any(u < -1e-9) or np.any(u > upper + 1e-9):
            raise RadiusExceedsDomainError(
                f"sphere of radius {rgrid.r_max} bohr leaves the non-periodic grid")
    try:
        samples = trilinear_sample(grid, pts)
    except OutOfDomainError as exc:  # pragma: no cover - guarded above
        raise RadiusExceedsDomainError(str(exc)) from None
    values = samples.reshape(len(r), len(w)) @ w
    return RadialProfile(rgrid, center, values)


def _inner_poly(profile: RadialProfile, kind: str) -> np.ndarray:
    """Coefficients (c0, c1, c2) of the near-nucleus model fitted to the three
    innermost points: exact quadratic, or least-squares line."""
    r = profile.radii[:3]
    v = profile.values[:3]
    if kind == "quadratic":
        # Newton divided differences: exact for constants, no Vandermonde solve
        d01 = (v[1] - v[0]) / (r[1] - r[0])
        d12 = (v[2] - v[1]) / (r[2] - r[1])
        d2 = (d12 - d01) / (r[2] - r[0])
        return np.array([v[0] - d01 * r[0] + d2 * r[0] * r[1],
                         d01 - d2 * (r[0] + r[1]),
                         d2])
    if kind == "linear":
        rm, vm = r.mean(), v.mean()
        slope = np.sum((r - rm) * (v - vm)) / np.sum((r - rm) ** 2)
        return np.array([vm - slope * rm, slope, 0.0])
    raise ValueError(f"unknown extrapolation kind {kind!r}")


def extrapolate_to_nucleus(profile: RadialProfile, kind: str = "quadratic") -> float:
    """Density at r = 0 from the three innermost profile values."""
    return float(_inner_poly(profile, kind)[0])


def thomson_average(profile: RadialProfile, r_T: float, kind: str = "quadratic") -> float:
    """Volume-averaged density ``3/r_T^3 * int_0^r_T v(r) r^2 dr``.

    Below ``r_min`` the extrapolation polynomial is integrated analytically;
    above it ``v`` is interpolated linearly between log-grid nodes and each
    segment integrated exactly against ``r^2``.
    """
    if not r_T > 0:
        raise ValueError("Thomson radius must be positive")
    r = profile.radii
    if r_T >= r[-1]:
        raise ValueError(f"r_T={r_T} is not below r_max={r[-1]}")
    c0, c1, c2 = _inner_poly(profile, kind)
    r_in = min(r_T, r[0])
    total = c0 * r_in ** 3 / 3 + c1 * r_in ** 4 / 4 + c2 * r_in ** 5 / 5
    if r_T > r[0]:
        m = int(np.searchsorted(r, r_T))  # r[m-1] < r_T <= r[m]
        v = profile.values
        v_T = v[m - 1] + (v[m] - v[m - 1]) * (r_T - r[m - 1]) / (r[m] - r[m - 1])
        ra = np.append(r[:m], r_T)
        va = np.append(v[:m], v_T)
        total += _linear_r2_integral(ra, va)
    return float(3.0 * total / r_T ** 3)


def _linear_r2_integral(r: np.ndarray, v: np.ndarray) -> float:
    """Exact integral of the piecewise-linear interpolant of v times r^2."""
    a, b = r[:-1], r[1:]
    va, vb = v[:-1], v[1:]
    slope = (vb - va) / (b - a)
    # v(r) = va + slope (r - a) = (va - slope a) + slope r
    c = va - slope * a
    seg = c * (b ** 3 - a ** 3) / 3 + slope * (b ** 4 - a ** 4) / 4
    return float(seg.sum())
