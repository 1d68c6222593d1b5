import numpy as np
import pytest

from spinform.cquat import ComplexQuaternion, IdealElement, cq_H, cq_mul, ideal_norm, pi_project
from spinform.fieldsolve import holonomy_residual
from spinform.minkowski import (SpinFrameField, _to_real, correspond_from_g1, correspond_to_h2r,
                                correspondence_residual, flow_v, mink_gauss, mink_immerse,
                                pattern_defect, v_rhs)
from spinform.spinsurface import InvariantBreach, SpinorComponentField, flow_g1
from spinform.weierstrass import PlanarGrid, family_constant, family_rotational, family_strip

FAMILIES = [family_constant(0.4), family_rotational(), family_strip(0.3)]


@pytest.fixture(scope="module")
def grid():
    return PlanarGrid.disk(0.5, 64)


def spin12(rng, n):
    a = rng.standard_normal((n, 4))
    a[:, 0] += 4.0
    v = ComplexQuaternion.from_parts(a[:, 0], a[:, 1], 1j * a[:, 2], 1j * a[:, 3])
    return v / np.sqrt(cq_H(v).real)


def constant_frame(grid, value):
    c = np.broadcast_to(np.asarray(value, complex), grid.shape + (4,))
    return SpinFrameField(grid, ComplexQuaternion(c))


def test_pattern_defect():
    assert pattern_defect(np.array([1, 2, 3j, -1j])) == 0
    assert pattern_defect(np.array([1, 2, 3, 0])) == 3


def test_initial_value_checks(grid):
    d = family_constant()
    with pytest.raises(ValueError):
        flow_v(d, grid, init=ComplexQuaternion([1, 0, 1, 0]))
    with pytest.raises(ValueError):
        flow_v(d, grid, init=ComplexQuaternion([1, 0, 0, 0]))


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
def test_norm_law_and_pattern(grid, family):
    f = flow_v(family, grid)
    _, t = family.sample(grid)
    assert np.nanmax(np.abs(f.norm - np.sqrt(t))) < 1e-6
    assert f.pattern_defect() == 0


def test_v_flow_holonomy(grid):
    d = family_constant(0.4)
    f = flow_v(d, grid)
    assert np.nanmax(holonomy_residual(_to_real(f.vp), v_rhs(d), grid)) < 5e-7


def test_gauss_map_examples(rng):
    assert np.allclose(mink_gauss(ComplexQuaternion([1, 0, 0, 0])).as_array(), [1, 0, 0])
    v = spin12(rng, 100)
    G = mink_gauss(v)
    assert np.max(np.abs(G.constraint())) < 1e-10
    th = 0.9
    rot = cq_mul(ComplexQuaternion([np.cos(th), np.sin(th), 0, 0]), v)
    assert np.allclose(mink_gauss(rot).as_array(), G.as_array(), atol=1e-12)


def test_constant_frame_gives_flat_plane():
    g = PlanarGrid.disk(0.5, 16)
    s = mink_immerse(constant_frame(g, [1, 0, 0, 0]))
    m = g.mask
    assert np.allclose(s.F[m], np.stack([np.zeros(m.sum()), g.z.real[m], g.z.imag[m]], -1), atol=1e-14)
    assert np.nanmax(np.abs(s.H_meas)) < 1e-12
    assert np.allclose(s.normal[np.isfinite(s.normal[..., 0])], [1, 0, 0])


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
def test_immersion_geometry(grid, family):
    s = mink_immerse(flow_v(family, grid))
    summ = s.summary()
    assert summ["H_error_max"] < 1e-3
    assert summ["conformality_max"] < 5e-3
    _, t = family.sample(grid)
    rel = np.abs(s.metric_factor**2 - t) / t
    assert np.nanmax(rel) < 5e-3
    # spacelike surface: the normal is timelike and future pointing
    n = s.normal[np.isfinite(s.normal[..., 0])]
    assert np.all(n[:, 0] > 0) and np.allclose(-n[:, 0] ** 2 + n[:, 1] ** 2 + n[:, 2] ** 2, -1)


def test_immersion_rejects_non_closed_form():
    g = PlanarGrid.disk(0.5, 16)
    x = g.z.real
    # v' = cos(x) + sin(x) I: d xi is not zero, so the plaquette loops do not close
    vp = ComplexQuaternion.from_parts(np.cos(3 * x), np.sin(3 * x), 0 * x, 0 * x)
    with pytest.raises(InvariantBreach):
        mink_immerse(SpinFrameField(g, vp))


def test_normal_matches_gauss_map(grid):
    d = family_constant()
    f = flow_v(d, grid)
    s = mink_immerse(f)
    G = mink_gauss(f.v).as_array()
    ok = np.isfinite(s.normal[..., 0])
    assert np.max(np.abs(s.normal[ok] - G[ok])) < 1e-4


def test_correspondence_simple_values():
    g = PlanarGrid.disk(0.5, 4)
    one = constant_frame(g, [1, 0, 0, 0])
    g1 = correspond_to_h2r(one)
    assert np.allclose(g1.g1p.a[g.mask], 1) and np.allclose(g1.g1p.b[g.mask], 0)
    half = SpinorComponentField(g, IdealElement(np.ones(g.shape), np.zeros(g.shape)))
    back = correspond_from_g1(half)
    assert np.allclose(back.vp.c[g.mask], [1, 0, 0, 0])


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
def test_correspondence(grid, family):
    f = flow_v(family, grid)
    g1 = correspond_to_h2r(f, family)
    m = grid.mask
    assert g1.provenance["flow_residual"] < 1e-8
    assert np.nanmax(correspondence_residual(f, family)) < 1e-8
    G_mink, G_h2r = mink_gauss(f.v).as_array(), pi_project(g1.g1p).as_array()
    assert np.max(np.abs(G_mink[m] - G_h2r[m])) < 1e-8
    assert np.allclose(ideal_norm(g1.g1p)[m], f.norm[m], atol=1e-12)
    back = correspond_from_g1(g1)
    assert np.max(np.abs(back.vp.c[m] - f.vp.c[m])) < 1e-10
    # the image agrees with a g1' flowed directly
    direct = flow_g1(family, grid)
    assert np.max(np.abs(direct.g1p.as_real()[m] - g1.g1p.as_real()[m])) < 1e-8


def test_any_ideal_element_has_a_preimage(rng):
    g = PlanarGrid.disk(0.5, 8)
    a = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    b = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    g1 = SpinorComponentField(g, IdealElement(a, b))
    back = correspond_to_h2r(correspond_from_g1(g1))
    m = g.mask
    assert np.allclose(back.g1p.a[m], a[m]) and np.allclose(back.g1p.b[m], b[m])
    assert correspond_from_g1(g1).pattern_defect() == 0
