import math

import numpy as np
import pytest

from sobolevlab.cutoffs import (CutoffFamily, LambdaSpec, ModelManifold, build_cutoff, eta,
                                iterated_exp, lambda_eval, reciprocal_diverges, verify_cutoff)
from sobolevlab.errors import ParameterError


def test_lambda_values():
    assert lambda_eval(LambdaSpec(1), math.e**2) == pytest.approx(2 * math.e**2, rel=1e-12)
    assert lambda_eval(LambdaSpec(2), math.e**math.e) == pytest.approx(math.e ** (math.e + 1), rel=1e-12)
    assert lambda_eval(LambdaSpec(0), 7.0) == pytest.approx(7.0)


def test_threshold_defaults():
    assert LambdaSpec(1).t0 == pytest.approx(math.e)
    assert LambdaSpec(2).t0 == pytest.approx(iterated_exp(2), rel=1e-12)
    with pytest.raises(ParameterError):
        LambdaSpec(2, t0=3.0)


def test_lambda_is_c2_and_positive():
    spec = LambdaSpec(1)
    t = np.array([spec.t0 - 1e-7, spec.t0 + 1e-7])
    lam, d1, d2 = spec.derivs(t)
    assert np.allclose(lam[0], lam[1], rtol=1e-6) and np.allclose(d1[0], d1[1], rtol=1e-5)
    assert np.allclose(d2[0], d2[1], rtol=1e-4)
    assert np.all(spec(np.linspace(0, 20, 200)) > 0)


def test_reciprocal_diverges_symbolically():
    assert reciprocal_diverges(1) and reciprocal_diverges(2)


def test_A_inverse_roundtrip():
    spec = LambdaSpec(1)
    r = np.array([5.0, 50.0, 500.0])
    assert np.allclose(spec.A_inverse(spec.A(r)), r, rtol=1e-10)


def test_eta_shape():
    s = np.linspace(-0.5, 1.5, 401)
    v = eta(s)
    assert v[0] == 1.0 and v[-1] == 0.0 and np.all(np.diff(v) <= 1e-15)
    assert np.max(np.abs(eta(s, 1))) == pytest.approx(1.875, rel=1e-4)


def test_cutoff_is_one_inside_and_zero_outside():
    fam = CutoffFamily(LambdaSpec(1))
    c = build_cutoff(fam, 10.0)
    assert c.value(np.array([1.0, 9.99])).tolist() == [1.0, 1.0]
    assert c.value(np.array([c.support_radius * 1.01])) == 0.0


def test_cutoff_derivative_matches_fd():
    c = build_cutoff(CutoffFamily(LambdaSpec(1)), 10.0)
    r = c.transition_grid(11)[3:8]
    h = 1e-4
    _, c1, c2, c3 = c.derivs(r)
    assert np.allclose((c.value(r + h) - c.value(r - h)) / (2 * h), c1, rtol=1e-5, atol=1e-12)
    assert np.allclose((c.derivs(r + h)[1] - c.derivs(r - h)[1]) / (2 * h), c2, rtol=1e-5, atol=1e-12)


def test_build_cutoff_below_threshold():
    with pytest.raises(ParameterError):
        build_cutoff(CutoffFamily(LambdaSpec(2)), 5.0)
    with pytest.raises(ParameterError):
        verify_cutoff(CutoffFamily(LambdaSpec(2)), ModelManifold(), [5.0, 20.0])


def test_single_R_sweep_is_uniform():
    rep = verify_cutoff(CutoffFamily(LambdaSpec(1)), ModelManifold(), [10.0])
    assert rep.meta["uniform"] and all(c.ratio == 0.5 for c in rep.checks)


def test_gradient_weight_flat_across_R():
    rep = verify_cutoff(CutoffFamily(LambdaSpec(1)), ModelManifold(), [10, 20, 30, 40], k=3)
    for key in ("sup_grad_lambda", "sup_hess_lambda"):
        vals = [row[key] for row in rep.rows]
        assert max(vals) / min(vals) < 1.01
    assert all(rep.meta["nonincreasing"].values())


def test_euclidean_model_constants_smaller():
    fam = CutoffFamily(LambdaSpec(1))
    hyp = verify_cutoff(fam, ModelManifold(2, "sinh"), [10, 20, 30, 40])
    flat = verify_cutoff(fam, ModelManifold(2, "identity"), [10, 20, 30, 40])
    assert all(flat.meta["nonincreasing"].values())
    assert max(r["sup_lap"] for r in flat.rows) < max(r["sup_lap"] for r in hyp.rows)


def test_discrete_laplacian_agrees():
    rep = verify_cutoff(CutoffFamily(LambdaSpec(1)), ModelManifold(), [10.0])
    row = rep.rows[0]
    assert row["sup_lap_discrete"] == pytest.approx(row["sup_lap"], rel=1e-3)


def test_family_roundtrip():
    fam = CutoffFamily(LambdaSpec(2))
    again = CutoffFamily.from_dict(fam.to_dict())
    assert again.lam.K == 2 and again.lam.t0 == pytest.approx(fam.lam.t0)


def test_ricci_constant_hyperbolic():
    assert ModelManifold().ricci_constant(LambdaSpec(1)) > 0
    assert ModelManifold(2, "identity").ricci_constant(LambdaSpec(1)) == 0
