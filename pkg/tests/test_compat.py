import json

import numpy as np
import pytest

from spinform.compat import (InvalidPointData, PointData, bstar, clifford_check_all, codazzi_lhs,
                             codazzi_rhs, curvature_clifford_check, evaluate_batch,
                             fundamental_residuals, gauss_rhs, load_batch, random_point_data,
                             ricci_rhs)


def product_slice(p, q, c1, c2, t_sign=1.0):
    """A totally geodesic piece of the first factor: B = 0, f = id, h = s = 0."""
    zeros = {k: np.zeros(s) for k, s in {
        "B": (p, p, q), "dB": (p, p, p, q), "df": (p, p, p), "dh": (p, q, p), "ds": (p, p, q),
        "dt": (p, q, q), "RT": (p, p, p, p), "RN": (p, p, q, q), "h": (q, p), "s": (p, q)}.items()}
    return PointData(p=p, q=q, c1=c1, c2=c2, f=np.eye(p), t=t_sign * np.eye(q), **zeros)


def test_bstar_is_the_adjoint(rng):
    B = rng.standard_normal((3, 3, 2))
    B = B + B.transpose(1, 0, 2)
    Bs = bstar(B)
    X, Y, N = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(2)
    lhs = np.einsum("x,y,xyr,r", X, Y, B, N)
    rhs = Y @ np.einsum("x,r,xrj->j", X, N, Bs)
    assert np.isclose(lhs, rhs)
    B1 = np.zeros((2, 2, 1))
    B1[0, 1, 0] = B1[1, 0, 0] = 1.0
    assert np.allclose(bstar(B1)[0, 0], [0, 1])
    with pytest.raises(ValueError):
        bstar(np.zeros((2, 3, 1)))


def test_totally_geodesic_slice_has_constant_curvature():
    d = product_slice(3, 1, 2.0, 5.0)
    R = gauss_rhs(d)
    # sectional curvature c1 on every coordinate plane
    for x in range(3):
        for y in range(3):
            if x != y:
                assert np.isclose(R[x, y, x, y], 2.0)
    assert np.allclose(ricci_rhs(d), 0) and np.allclose(codazzi_rhs(d), 0)
    curved = PointData(**{**_fields(d), "RT": R})
    assert fundamental_residuals(curved).max() < 1e-14
    # the flat RT stored in d itself misses Gauss by exactly c1
    assert np.isclose(fundamental_residuals(d).gauss, 2.0)


def _fields(d):
    return {k: getattr(d, k) for k in d.__dataclass_fields__}


def test_zero_second_fundamental_form_gives_zero_b_blocks(rng):
    d = random_point_data(rng, 3, 2)
    flat = PointData(**{**_fields(d), "B": np.zeros_like(d.B)})
    check = curvature_clifford_check(flat, 0, 1)
    assert check.B_discrepancy == 0
    cp = 0.25 * (d.c1 + d.c2)
    h = d.h
    expected = -cp * (np.outer(h[:, 1], h[:, 0]) - np.outer(h[:, 0], h[:, 1]))
    assert np.allclose(ricci_rhs(flat)[0, 1], expected)


@pytest.mark.parametrize("p,q", [(1, 1), (2, 1), (2, 2), (3, 1), (3, 3)])
def test_manufactured_data_satisfies_every_equation(rng, p, q):
    for c1, c2 in ((1.0, 1.0), (2.0, 0.5), (-1.0, -3.0)):
        d = random_point_data(rng, p, q, c1, c2)
        r = fundamental_residuals(d)
        assert r.max() < 1e-12
        assert set(r.frobenius) == {"gauss", "ricci", "codazzi", "fhst1", "fhst2", "fhst3", "fhst4"}
        # the Codazzi left side is antisymmetric in its first two slots
        L = codazzi_lhs(d)
        assert np.allclose(L, -L.transpose(1, 0, 2, 3))


def test_inconsistent_data_is_detected(rng):
    d = random_point_data(rng, 3, 2, consistent=False)
    r = fundamental_residuals(d)
    assert min(r.gauss, r.ricci, r.fhst1, r.fhst4) > 1e-3


@pytest.mark.parametrize("p,q", [(2, 1), (2, 2), (3, 2), (3, 3)])
def test_clifford_cross_check(rng, p, q):
    d = random_point_data(rng, p, q, 1.5, 0.5)
    assert clifford_check_all(d).worst() < 1e-12
    bad = random_point_data(rng, p, q, 1.5, 0.5, consistent=False)
    assert clifford_check_all(bad).abc_residual > 1e-3


def test_clifford_check_guards(rng):
    d = random_point_data(rng, 2, 1)
    with pytest.raises(IndexError):
        curvature_clifford_check(d, 0, 2)
    with pytest.raises(ValueError):
        curvature_clifford_check(random_point_data(rng, 4, 3), 0, 1)


def test_invalid_point_data(rng):
    d = random_point_data(rng, 2, 1)
    f = _fields(d)
    with pytest.raises(InvalidPointData):
        PointData(**{**f, "B": np.zeros((3, 3))})
    with pytest.raises(InvalidPointData):
        PointData(**{**f, "c2": -1.0}).validate()
    skew = np.array(d.B)
    skew[0, 1, 0] += 1.0
    with pytest.raises(InvalidPointData):
        PointData(**{**f, "B": skew}).validate()
    with pytest.raises(InvalidPointData):
        PointData(**{**f, "f": 2 * np.eye(2)}).validate()
    with pytest.raises(InvalidPointData):
        PointData.from_dict({"p": 2, "q": 1})


def test_batch_round_trip(tmp_path, rng):
    items = [random_point_data(rng, 2, 1), product_slice(2, 0, 1.0, 1.0)]
    good = items[0].to_dict()
    broken = dict(good, c1=1.0, c2=-1.0)
    path = tmp_path / "batch.json"
    path.write_text(json.dumps([good, items[1].to_dict(), broken]))
    loaded = load_batch(path)
    assert len(loaded) == 3 and loaded[1].q == 0
    report = evaluate_batch(loaded)
    assert report[0]["valid"] and report[0]["gauss"] < 1e-12
    assert report[1]["valid"] and report[1]["gauss"] == pytest.approx(1.0)
    assert not report[2]["valid"] and "c1" in report[2]["error"]
    assert evaluate_batch([]) == []
    path.write_text("{}")
    with pytest.raises(InvalidPointData):
        load_batch(path)
