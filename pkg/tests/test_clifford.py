import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinform.clifford import (MAX_DIM, Multivector, Signature, SkewOperator, bivector_of_map,
                               bivector_of_skew, commutator, geometric_product, grade_project,
                               ideal_split, is_unit_spinor, pairing, reversion, wedge_bivector)

CL03 = Signature(0, 3)


def e(sig, *idx):
    return Multivector.blade(sig, idx)


def rand_mv(rng, sig, even=False):
    c = rng.standard_normal(sig.size)
    if even:
        c[[bin(m).count("1") % 2 == 1 for m in range(sig.size)]] = 0
    return Multivector(sig, c)


def close(a, b, tol=1e-12):
    return (a - b).max_abs() < tol


def test_signature_guards():
    with pytest.raises(ValueError):
        Signature(-1, 2)
    with pytest.raises(ValueError):
        Signature(MAX_DIM, 1)
    assert Signature(1, 3).metric().tolist() == [-1, 1, 1, 1]


def test_coefficient_length_checked():
    with pytest.raises(ValueError):
        Multivector(CL03, np.zeros(7))


def test_multivector_is_immutable():
    a = e(CL03, 0)
    with pytest.raises(AttributeError):
        a.coeffs = np.zeros(8)
    with pytest.raises(ValueError):
        a.coeffs[0] = 1.0


def test_generator_squares_and_anticommutation():
    assert close(e(CL03, 0) * e(CL03, 0), Multivector.scalar(CL03, -1))
    assert (e(CL03, 0) * e(CL03, 1) + e(CL03, 1) * e(CL03, 0)).max_abs() == 0
    cl = Signature(2, 1)
    assert close(e(cl, 0) * e(cl, 0), Multivector.scalar(cl, 1))
    assert close(e(cl, 2) * e(cl, 2), Multivector.scalar(cl, -1))


def test_volume_element_anticommutes_with_e0():
    cl = Signature(0, 4)
    omega = -e(cl, 0, 1, 2, 3)
    assert close(omega * e(cl, 0), -(e(cl, 0) * omega))


def test_unit_is_neutral(rng):
    a = rand_mv(rng, Signature(1, 3))
    one = Multivector.scalar(a.sig, 1.0)
    assert close(one * a, a) and close(a * one, a)


def test_signature_mismatch_rejected():
    with pytest.raises(ValueError):
        geometric_product(e(CL03, 0), e(Signature(1, 2), 0))
    with pytest.raises(ValueError):
        pairing(e(CL03, 0), e(Signature(0, 4), 0))


def test_reversion_examples():
    v = Multivector.vector(CL03, [1.0, -2.0, 0.5])
    assert close(reversion(v), v)
    assert close(reversion(e(CL03, 0, 1)), -e(CL03, 0, 1))
    assert close(reversion(e(CL03, 0, 1, 2)), -e(CL03, 0, 1, 2))


def test_grade_projection_examples(rng):
    x = Multivector.scalar(CL03, 1) + e(CL03, 0) + e(CL03, 0, 1)
    assert close(grade_project(x, 1), e(CL03, 0))
    assert grade_project(e(CL03, 0, 1, 2), 2).max_abs() == 0
    a = rand_mv(rng, CL03)
    total = sum((grade_project(a, k) for k in range(4)), Multivector.zero(CL03))
    assert close(total, a)
    with pytest.raises(ValueError):
        grade_project(a, 4)


def test_associativity(rng):
    for r, s in [(0, 4), (1, 3), (2, 3), (3, 3)]:
        sig = Signature(r, s)
        a, b, c = (rand_mv(rng, sig) for _ in range(3))
        assert close((a * b) * c, a * (b * c), 1e-11)


def test_unit_spinor_check(rng):
    sig = Signature(0, 3)
    b = 0.7 * e(sig, 0, 1) + 0.2 * e(sig, 1, 2)
    theta = np.sqrt(0.53)
    g = np.cos(theta) + b * (np.sin(theta) / theta)
    assert is_unit_spinor(g)
    assert close(pairing(g, g), Multivector.scalar(sig, 1.0))
    assert not is_unit_spinor(g + e(sig, 0))
    assert not is_unit_spinor(2.0 * g)


@settings(max_examples=40, deadline=None)
@given(r=st.integers(0, 3), s=st.integers(0, 3), seed=st.integers(0, 2**32 - 1))
def test_clifford_relation_random_vectors(r, s, seed):
    sig = Signature(r, s)
    if sig.dim == 0:
        return
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal((2, sig.dim))
    V, W = Multivector.vector(sig, v), Multivector.vector(sig, w)
    inner = float(np.sum(sig.metric() * v * w))
    assert close(V * W + W * V, Multivector.scalar(sig, -2 * inner), 1e-11)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
def test_reversion_is_anti_automorphism(seed, n):
    rng = np.random.default_rng(seed)
    sig = Signature(0, n)
    a, b = rand_mv(rng, sig), rand_mv(rng, sig)
    assert close(reversion(a * b), reversion(b) * reversion(a), 1e-11)
    assert close(reversion(reversion(a)), a)


def test_pairing_symmetries(rng):
    sig = Signature(1, 3)
    phi, phi2 = rand_mv(rng, sig, even=True), rand_mv(rng, sig, even=True)
    Z = Multivector.vector(sig, rng.standard_normal(4))
    assert close(pairing(phi, phi2), reversion(pairing(phi2, phi)), 1e-11)
    assert close(pairing(Z * phi, phi2), pairing(phi, Z * phi2), 1e-11)


def test_skew_operator_validation():
    with pytest.raises(ValueError):
        SkewOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        SkewOperator(np.zeros((2, 3)))
    u = SkewOperator.from_matrix(np.array([[0.0, 1.0], [-1.0 + 1e-14, 0.0]]))
    assert np.array_equal(u.matrix, -u.matrix.T)
    with pytest.raises(ValueError):
        bivector_of_skew(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_elementary_rotation_bivector():
    u = np.zeros((3, 3))
    u[1, 0], u[0, 1] = 1.0, -1.0  # e1 -> e2, e2 -> -e1
    ub = bivector_of_skew(u)
    sig = ub.sig
    assert close(ub, 0.5 * e(sig, 0, 1))
    assert close(commutator(ub, e(sig, 0)), e(sig, 1))
    assert bivector_of_skew(np.zeros((4, 4))).max_abs() == 0


def test_bivector_of_skew_commutator(rng):
    a = rng.standard_normal((5, 5))
    u = SkewOperator(a - a.T)
    ub = bivector_of_skew(u)
    xi = rng.standard_normal(5)
    got = commutator(ub, Multivector.vector(ub.sig, xi))
    assert np.allclose(got.vector_part(), u(xi), atol=1e-12)
    assert close(got, grade_project(got, 1))
    assert close(ub, grade_project(ub, 2))


def test_bivector_of_map_examples(rng):
    u = np.zeros((2, 2))
    u[0, 0] = 1.0  # e1 -> e3 with p = q = 2
    ub = bivector_of_map(u)
    sig = ub.sig
    assert close(ub, 0.5 * e(sig, 0, 2))
    assert close(commutator(ub, e(sig, 0)), e(sig, 2))
    assert close(commutator(ub, e(sig, 2)), -e(sig, 0))
    assert bivector_of_map(np.zeros((2, 3))).max_abs() == 0
    m = rng.standard_normal((2, 3))
    assert close(bivector_of_map(m), bivector_of_map(m, symmetrized=True))
    with pytest.raises(ValueError):
        bivector_of_map(np.zeros(3))


def test_wedge_bivector_examples(rng):
    U, V = e(CL03, 0), e(CL03, 1)
    assert close(commutator(wedge_bivector(U, V), U), V)
    assert wedge_bivector(U, U).max_abs() == 0
    sig = Signature(0, 5)
    u, v, w = rng.standard_normal((3, 5))
    lhs = commutator(wedge_bivector(Multivector.vector(sig, u), Multivector.vector(sig, v)),
                     Multivector.vector(sig, w))
    assert np.allclose(lhs.vector_part(), u @ w * v - v @ w * u, atol=1e-12)


def test_ideal_split():
    sig = Signature(0, 4)
    omega = -e(sig, 0, 1, 2, 3)
    one = Multivector.scalar(sig, 1.0)
    p1, p2 = ideal_split(one, omega)
    assert close(p1, 0.5 * (one - omega)) and close(p2, 0.5 * (one + omega))
    q1, q2 = ideal_split(p1, omega)
    assert close(q1, p1) and q2.max_abs() < 1e-15
    # right multiplication by e0 exchanges the two ideals
    a = Multivector(sig, np.arange(16.0)) * 0.1
    a = a - grade_project(a, 1) - grade_project(a, 3)
    s1, s2 = ideal_split(a, omega)
    t1, t2 = ideal_split(s1 * e(sig, 0), omega)
    assert close(t1, Multivector.zero(sig)) and close(t2, s1 * e(sig, 0))
    assert close(s1 + s2, a)
    with pytest.raises(ValueError):
        ideal_split(one, e(sig, 0))
