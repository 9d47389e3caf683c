"""Randomized invariants of the hyperfine pipeline."""
import io

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hfitensor.constants import lookup_isotope
from hfitensor.hfi import assemble_tensor, dipolar_tensor, fermi_contact
from hfitensor.spin import screen
from hfitensor.volumetric import AtomSite, Cell, SpinDensityGrid, parse_cube, synth_gaussian, write_cube

from conftest import random_rotation

H1 = lookup_isotope("H", 1)
C13 = lookup_isotope("C", 13)
FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

dims = st.tuples(*[st.integers(4, 9)] * 3)
densities = dims.flatmap(lambda d: arrays(np.float64, d, elements=st.floats(-1, 1, width=32)))
fractions = st.tuples(*[st.floats(0, 1, exclude_max=True)] * 3)


def grid_of(values, periodic=True, edge=6.0):
    return SpinDensityGrid(Cell(np.diag([edge, edge * 1.1, edge * 0.9]), periodic), values)


def site_at(grid, frac):
    return AtomSite(1, np.asarray(frac) @ grid.cell.vectors)


@FAST
@given(densities, fractions, st.floats(-3, 3), st.floats(-3, 3), st.booleans())
def test_dipolar_is_linear(values, frac, alpha, beta, periodic):
    g1 = grid_of(values, periodic)
    g2 = g1.with_values(np.roll(values[::-1], 1, axis=1))
    site = site_at(g1, frac)
    cut = 2.5
    combo = dipolar_tensor(alpha * g1 + beta * g2, site, H1, cutoff=cut)
    parts = alpha * dipolar_tensor(g1, site, H1, cutoff=cut) + beta * dipolar_tensor(g2, site, H1, cutoff=cut)
    scale = 1 + np.abs(parts).max()
    np.testing.assert_allclose(combo, parts, atol=1e-9 * scale)


@FAST
@given(densities, fractions)
def test_dipolar_symmetric_traceless(values, frac):
    g = grid_of(values)
    b = dipolar_tensor(g, site_at(g, frac), C13)
    scale = 1 + np.abs(b).max()
    assert np.abs(b - b.T).max() <= 1e-12 * scale
    assert abs(np.trace(b)) <= 1e-12 * scale


@FAST
@given(densities, fractions)
def test_isotope_scaling(values, frac):
    g = grid_of(values)
    site = site_at(g, frac)
    ratio = C13.g_factor / H1.g_factor
    np.testing.assert_allclose(dipolar_tensor(g, site, C13), ratio * dipolar_tensor(g, site, H1),
                               rtol=1e-12, atol=1e-12)
    a_h = fermi_contact(g, site, H1, "grid_interp")
    a_c = fermi_contact(g, site, C13, "grid_interp")
    assert np.isclose(a_c, ratio * a_h, rtol=1e-12, atol=1e-12)


@FAST
@given(densities, fractions, st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_periodic_translation_invariance(values, frac, s0, s1, s2):
    g = grid_of(values)
    site = site_at(g, frac)
    shifted = g.with_values(np.roll(values, (s0, s1, s2), axis=(0, 1, 2)))
    moved = AtomSite(1, site.position + np.array([s0, s1, s2]) @ g.steps)
    b0 = dipolar_tensor(g, site, H1, cutoff=2.5)
    b1 = dipolar_tensor(shifted, moved, H1, cutoff=2.5)
    np.testing.assert_allclose(b1, b0, atol=1e-9 * (1 + np.abs(b0).max()))


COMPACT = synth_gaussian([7.0, 8.0, 7.5], 0.6, 1.0, Cell.cubic(20.0), (40, 40, 40))


@settings(max_examples=15, deadline=None)
@given(st.floats(4.5, 10.0), st.floats(4.5, 10.0))
def test_cutoff_convergence_for_compact_density(c1, c2):
    # once the cutoff sphere contains the whole density the tensor stops changing
    nuc = AtomSite(6, [8.5, 7.0, 8.0])
    b1 = dipolar_tensor(COMPACT, nuc, C13, cutoff=c1)
    b2 = dipolar_tensor(COMPACT, nuc, C13, cutoff=c2)
    np.testing.assert_allclose(b1, b2, atol=1e-8 * np.abs(b1).max())


symmetric_traceless = arrays(np.float64, (3, 3), elements=st.floats(-50, 50)).map(
    lambda m: 0.5 * (m + m.T) - np.trace(m) / 6 * np.eye(3) * 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2000, 2000), symmetric_traceless, st.integers(0, 2 ** 32 - 1))
def test_decomposition_round_trip(a, b, seed):
    t = assemble_tensor(a, b, trace_tol=1e-9)
    np.testing.assert_allclose(t.full, a * np.eye(3) + b, atol=1e-9)
    assert np.isclose(t.isotropic_part(), a, atol=1e-9)
    w, v = t.principal_values, t.principal_axes
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, t.dipolar, atol=1e-9)
    assert np.linalg.det(v) > 0
    # rotating the tensor leaves its principal values unchanged
    q = random_rotation(np.random.default_rng(seed))
    rotated = assemble_tensor(a, q @ t.dipolar @ q.T, trace_tol=1e-8)
    np.testing.assert_allclose(rotated.principal_values, w, atol=1e-8)


atom_lists = st.lists(st.tuples(st.integers(1, 36), fractions), max_size=3)


@settings(max_examples=100, deadline=None)
@given(densities, atom_lists, st.booleans(),
       st.tuples(*[st.floats(-5, 5, width=32)] * 3))
def test_cube_round_trip(values, atoms, periodic, origin):
    cell = Cell(np.array([[6.0, 0, 0], [0.5, 5.5, 0], [0.2, -0.3, 7.0]]), periodic)
    sites = [AtomSite(z, np.asarray(f) @ cell.vectors) for z, f in atoms]
    g = SpinDensityGrid(cell, values, origin, sites)
    buf = io.StringIO()
    write_cube(g, buf)
    back = parse_cube(io.StringIO(buf.getvalue()))
    assert back.dims == g.dims
    assert back.cell.periodic == periodic
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_allclose(back.cell.vectors, cell.vectors, rtol=0, atol=1e-14)
    np.testing.assert_allclose(back.origin, g.origin, atol=1e-14)
    assert [a.Z for a in back.atoms] == [a.Z for a in sites]
    for x, y in zip(back.atoms, sites):
        np.testing.assert_allclose(x.position, y.position, atol=1e-14)


contacts = st.lists(st.floats(-30, 30), min_size=1, max_size=5)


@settings(max_examples=60, deadline=None)
@given(contacts, st.randoms())
def test_screening_sign_and_order(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    flipped = [-a if rnd.random() < 0.5 else a for a in shuffled]
    v0, v1 = screen([("x", values), ("y", flipped)])
    assert v0.passed == v1.passed and v0.similar == v1.similar
    assert np.isclose(v0.distance_from_optimum, v1.distance_from_optimum)
    assert sorted(v0.in_window) == sorted(v1.in_window)
