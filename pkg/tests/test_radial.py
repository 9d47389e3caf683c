import io

import numpy as np
import pytest

from hfitensor.radial import (LogRadialGrid, RadialProfile, RadiusExceedsDomainError, angular_rule,
                              extrapolate_to_nucleus, spherical_average, thomson_average)
from hfitensor.volumetric import Cell, SpinDensityGrid, synth_gaussian

from conftest import random_rotation


def profile_of(fn, rgrid=None):
    rgrid = rgrid or LogRadialGrid()
    return RadialProfile(rgrid, np.zeros(3), fn(rgrid.nodes))


def test_log_grid_nodes():
    g = LogRadialGrid(1e-4, 5.0, 1000)
    r = g.nodes
    assert r[0] == pytest.approx(1e-4) and r[-1] == pytest.approx(5.0)
    assert np.allclose(r[1:] / r[:-1], (5.0 / 1e-4) ** (1 / 999))
    with pytest.raises(ValueError):
        LogRadialGrid(1.0, 0.5, 10)
    with pytest.raises(ValueError):
        LogRadialGrid(1e-3, 1.0, 2)


def test_angular_rule_is_normalized_and_exact():
    xyz, w = angular_rule(17)
    assert xyz.shape == (110, 3)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    # <z^2> = 1/3, <x^2 y^2 z^2> = 1/105 on the unit sphere
    assert w @ xyz[:, 2] ** 2 == pytest.approx(1 / 3, abs=1e-14)
    assert w @ (xyz[:, 0] * xyz[:, 1] * xyz[:, 2]) ** 2 == pytest.approx(1 / 105, abs=1e-14)
    with pytest.raises(ValueError):
        angular_rule(16)


def test_uniform_density_profile():
    g = SpinDensityGrid(Cell.cubic(12.0), np.full((8, 8, 8), 0.3))
    prof = spherical_average(g, [6, 6, 6])
    assert np.allclose(prof.values, 0.3, atol=1e-14)


def test_odd_density_averages_to_zero():
    # rho = x on a non-periodic grid; trilinear interpolation of a linear field is exact
    n = 41
    x = np.arange(n) * 12.0 / n - 6.0
    vals = np.broadcast_to(x[:, None, None], (n, n, n))
    g = SpinDensityGrid(Cell.cubic(12.0, periodic=False), vals, origin=[-6, -6, -6])
    prof = spherical_average(g, [0.0, 0.0, 0.0], LogRadialGrid(1e-4, 5.0, 200))
    assert np.max(np.abs(prof.values)) < 1e-10


def test_gaussian_profile_matches_analytic(gaussian96):
    prof = spherical_average(gaussian96, [6, 6, 6])
    exact = np.pi ** -1.5 * np.exp(-prof.radii ** 2)
    assert np.max(np.abs(prof.values - exact) / exact[0]) < 0.01


def test_radius_exceeds_nonperiodic_domain():
    g = SpinDensityGrid(Cell.cubic(6.0, periodic=False), np.zeros((12, 12, 12)))
    with pytest.raises(RadiusExceedsDomainError):
        spherical_average(g, [2.75, 2.75, 2.75], LogRadialGrid(1e-4, 5.0, 50))


def test_extrapolation_examples():
    assert extrapolate_to_nucleus(profile_of(lambda r: np.full_like(r, 0.7))) == pytest.approx(0.7, abs=1e-12)
    rg = LogRadialGrid(0.1, 2.0, 10)
    quad = profile_of(lambda r: 2 - 3 * r + r ** 2, rg)
    assert extrapolate_to_nucleus(quad) == pytest.approx(2.0, abs=1e-12)
    h1s = profile_of(lambda r: np.exp(-2 * r) / np.pi)
    assert extrapolate_to_nucleus(h1s) == pytest.approx(1 / np.pi, rel=5e-3)
    lin = profile_of(lambda r: 1 + r, rg)
    assert extrapolate_to_nucleus(lin, "linear") == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        extrapolate_to_nucleus(lin, "cubic")


def test_thomson_average_examples():
    const = profile_of(lambda r: np.full_like(r, 2.5))
    assert thomson_average(const, 1.0) == pytest.approx(2.5, rel=1e-12)
    # v = r: 3/rT^3 * int r^3 dr = 3 rT / 4
    lin = profile_of(lambda r: r)
    for rT in (0.37, 1.0, 2.2):
        assert thomson_average(lin, rT) == pytest.approx(0.75 * rT, rel=1e-10)
    # below the first node only the extrapolation polynomial contributes
    assert thomson_average(const, 1e-6) == pytest.approx(extrapolate_to_nucleus(const), rel=1e-12)
    with pytest.raises(ValueError):
        thomson_average(const, 5.0)
    with pytest.raises(ValueError):
        thomson_average(const, 0.0)


def test_thomson_tends_to_nucleus_value():
    prof = profile_of(lambda r: np.exp(-r ** 2) * (1 + 0.3 * r ** 2))
    assert thomson_average(prof, 1e-6) == pytest.approx(extrapolate_to_nucleus(prof), rel=1e-6)


def test_spherical_average_linear_in_density():
    rng = np.random.default_rng(3)
    cell = Cell.cubic(10.0)
    a = SpinDensityGrid(cell, rng.normal(size=(10, 10, 10)))
    b = SpinDensityGrid(cell, rng.normal(size=(10, 10, 10)))
    rg = LogRadialGrid(1e-3, 4.0, 40)
    pa, pb, pab = (spherical_average(g, [5, 5, 5], rg).values for g in (a, b, a + b))
    assert np.allclose(pab, pa + pb, rtol=1e-12, atol=1e-12 * np.abs(pab).max())


def test_rotation_invariance_of_profile():
    rng = np.random.default_rng(4)
    R = random_rotation(rng)
    cell = Cell.cubic(12.0)
    c = np.array([6.0, 6.0, 6.0])
    # anisotropic blob off center; rotating it about c must leave the profile unchanged
    off = np.array([0.0, 0.0, 1.5])
    g1 = synth_gaussian(c + off, 0.8, 1.0, cell, (96, 96, 96))
    g2 = synth_gaussian(c + R @ off, 0.8, 1.0, cell, (96, 96, 96))
    rg = LogRadialGrid(0.05, 3.0, 30)
    p1 = spherical_average(g1, c, rg, 41).values
    p2 = spherical_average(g2, c, rg, 41).values
    assert np.max(np.abs(p1 - p2)) < 0.02 * np.max(np.abs(p1))


def test_profile_csv_export():
    prof = profile_of(lambda r: r, LogRadialGrid(0.1, 1.0, 3))
    buf = io.StringIO()
    prof.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "r_bohr,density"
    assert len(lines) == 4
    assert float(lines[1].split(",")[0]) == pytest.approx(0.1)
