import math

import numpy as np
import pytest
from scipy import special

from sobolevlab import geometry as geo
from sobolevlab.calculus import Mesh
from sobolevlab.cutoffs import CutoffFamily, LambdaSpec, ModelManifold
from sobolevlab.errors import DomainError, ParameterError
from sobolevlab.lab import bochner, cone, density, doubling, regularity, transition
from sobolevlab.lab.fields import (Bump, RadialBump, chart_distance, gaussian_windowed_bump,
                                   random_bumps, sample)


@pytest.fixture(scope="module")
def flat_mesh():
    return Mesh(geo.euclidean_chart(2, (-1.0, -1.0), (1.0, 1.0)), step=1 / 128)


@pytest.fixture(scope="module")
def klein_mesh():
    return Mesh(geo.klein_chart(2, 0.8), step=1 / 128)


# fields


def test_chart_distance_closed_forms():
    y = np.array([0.6, 0.0])
    assert chart_distance(geo.klein_chart(2), y) == pytest.approx(math.atanh(0.6))
    assert chart_distance(geo.euclidean_chart(2), y, [0.0, 0.8]) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        chart_distance(geo.sphere_chart(), y)


def test_random_bumps_are_reproducible_and_compact(flat_mesh):
    a, b = random_bumps(4, seed=7), random_bumps(4, seed=7)
    assert [x.to_dict() for x in a] == [x.to_dict() for x in b]
    for bump in a:
        f = sample(flat_mesh, bump)
        assert flat_mesh.support_margin_ok(f.values) and f.values.min() >= 0 and f.values.max() > 0


# regularity


def test_regularity_gaussian_window_flat(flat_mesh):
    f = sample(flat_mesh, gaussian_windowed_bump())
    checks = regularity.check_regularity_lemma(f, 1.5, 0.3, 0.5)
    assert len(checks) == 4 and all(c.passed for c in checks)


def test_regularity_radial_bump_hyperbolic(klein_mesh):
    f = RadialBump("klein", 0.9).field(klein_mesh)
    assert all(c.passed for c in regularity.check_regularity_lemma(f, 1.5, 0.3, 0.5))


def test_regularity_guards(flat_mesh):
    f = sample(flat_mesh, gaussian_windowed_bump())
    with pytest.raises(ParameterError):
        regularity.check_regularity_lemma(f, 1.0, 0.3, 0.5)
    with pytest.raises(ParameterError):
        regularity.check_regularity_lemma(f, 1.5, 0.5, 0.5)
    near_one = regularity.check_regularity_lemma(f, 1.02, 0.3, 0.5)
    chain = [c for c in near_one if c.name.startswith("gradient_chain")]
    assert chain and not any(c.enforce for c in chain)
    assert all(c.provenance["guard"] for c in chain)


def test_integration_by_parts(flat_mesh, klein_mesh):
    for mesh in (flat_mesh, klein_mesh):
        f = sample(mesh, random_bumps(1, seed=2)[0])
        assert regularity.integration_by_parts_defect(f) < 1e-3


def test_p1_identities(flat_mesh, klein_mesh):
    zero = sample(flat_mesh, Bump((0.0, 0.0), ((10.0, 0.0), (0.0, 10.0)), 0.0))
    assert all(c.passed for c in regularity.check_p1_identities(zero))
    f = sample(flat_mesh, gaussian_windowed_bump())
    assert all(c.passed for c in regularity.check_p1_identities(f))
    g = RadialBump("klein", 0.9).field(klein_mesh)
    assert all(c.passed for c in regularity.check_p1_identities(g, (1e-2,)))


# Bochner


def test_bochner_constant_is_exactly_zero(klein_mesh):
    u = klein_mesh.sample(lambda x: np.full(len(x), 2.5))
    assert bochner.bochner_residual(u) == 0.0


def test_bochner_sphere_terms_match_closed_forms():
    m = Mesh(geo.sphere_chart((0.5, 2.6), (0.0, 2.0)), step=1 / 128)
    u = m.sample(lambda x: np.cos(x[..., 0]))
    t = bochner.bochner_terms(u)
    P = m.points
    reg = (P[..., 0] > 0.8) & (P[..., 0] < 2.3) & (P[..., 1] > 0.2) & (P[..., 1] < 1.8)
    z = np.cos(P[..., 0])
    exact = {"hess_sq": 2 * z**2, "ricci": 1 - z**2, "grad_lap_dot_grad": -2 * (1 - z**2),
             "half_lap_grad_sq": 2 * z**2 - (1 - z**2)}
    for key, val in exact.items():
        assert np.max(np.abs(t[key] - val)[reg]) < 2e-3, key


def test_bochner_flat_refinement():
    b = random_bumps(1, seed=3)[0]
    res = [bochner.bochner_residual(sample(Mesh(geo.euclidean_chart(2), step=h), b)) for h in (1 / 32, 1 / 64)]
    assert res[1] < res[0] / 2


# density


def test_density_compact_support_is_zero():
    fam, model = CutoffFamily(LambdaSpec(1)), ModelManifold()
    f = lambda r: np.where(r < 3, (3 - r) ** 4, 0.0)
    rep = density.density_experiment(model, fam, f, 2, 2.0, [6, 8])
    assert all(row["total"] == 0 for row in rep.rows)


def test_density_decay_p2():
    rep = density.density_experiment(ModelManifold(), CutoffFamily(LambdaSpec(1)), lambda r: np.exp(-r),
                                     2, 2.0, range(6, 15))
    total = next(c for c in rep.curves if c.name == "total")
    assert total.trend >= 0.9 and total.final_ratio < 0.1
    assert all(c.passed for c in rep.checks)


def test_density_refusals():
    fam = CutoffFamily(LambdaSpec(1))

    class Wild(ModelManifold):
        def ricci_constant(self, spec, r_max=1e4):
            return math.inf

    with pytest.raises(ParameterError):
        density.density_experiment(Wild(), fam, lambda r: np.exp(-r), 2, 2.0, [6, 7])
    with pytest.raises(ParameterError):
        density.density_experiment(ModelManifold(), fam, lambda r: np.ones_like(r), 2, 2.0, [6, 7])
    with pytest.raises(ParameterError):
        density.density_experiment(ModelManifold(), fam, lambda r: np.exp(-r), 4, 2.0, [6, 7])


# doubling and Poincare


def test_neumann_oracle_matches_bessel_zero():
    assert doubling.neumann_disk_oracle(1) == pytest.approx(1 / special.jnp_zeros(1, 1)[0], rel=1e-10)


def test_reverse_doubling_constant_positive():
    assert 0 < doubling.reverse_doubling_constant(2.0) <= 1.0


def test_flat_doubling_coarse():
    ch = geo.euclidean_chart(2, (-1.125, -1.125), (1.125, 1.125))
    rep = doubling.doubling_and_poincare(ch, (0.0, 0.0), [0.5], step=1 / 32, metric="exact", n_random=8)
    row = rep.rows[0]
    assert row["doubling_ratio"] == pytest.approx(4.0, rel=0.02)


def test_ball_escape_raises():
    mesh = Mesh(geo.euclidean_chart(2, (-1.0, -1.0), (1.0, 1.0)), step=1 / 16)
    d = doubling.distance_field(mesh, (0.0, 0.0), "exact")
    with pytest.raises(DomainError):
        doubling.ball_weights(mesh, d, 1.5)


def test_graph_distance_overestimates_slightly():
    mesh = Mesh(geo.euclidean_chart(2, (-1.0, -1.0), (1.0, 1.0)), step=1 / 32)
    dg = doubling.distance_field(mesh, (0.0, 0.0), "graph")
    de = doubling.distance_field(mesh, (0.0, 0.0), "exact")
    assert np.all(dg >= de - 1e-12) and np.max(dg / np.where(de > 0, de, 1)) < 1.03


# cone


def test_cone_angle_guard():
    with pytest.raises(ParameterError):
        cone.cone_energy_decay(2.5 * math.pi)
    with pytest.raises(ParameterError):
        cone.cone_energy_decay(0.0)


@pytest.mark.parametrize("theta,expected", [(math.pi, 1.0), (2 * math.pi, 0.0)])
def test_cone_exponent_coarse(theta, expected):
    cv = cone.cone_energy_decay(theta, step=1 / 64, n_phi=64)
    assert cv.meta["fitted_exponent"] == pytest.approx(expected, abs=0.03)
    assert cv.meta["expected_exponent"] == pytest.approx(expected)


# transition


def test_transition_gradient_matches_finite_differences():
    prob = transition.TransitionProblem(transition.flat_chart(), 1 / 64, 4.0, -1.0, 1.0)
    x = prob.harmonic_start()
    J, g = prob.objective(x)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(len(x))
    h = 1e-6
    fd = (prob.objective(x + h * v)[0] - prob.objective(x - h * v)[0]) / (2 * h)
    assert fd == pytest.approx(g @ v, rel=1e-6)


def test_transition_constant_data():
    res = transition.transition_norm_minimization(transition.flat_chart(), 4.0, 1.0, 1.0, step=1 / 64)
    assert res.converged and res.feasible
    assert res.norm == pytest.approx(res.volume ** 0.25, rel=1e-3)


def test_transition_unconverged_is_lower_bound():
    res = transition.transition_norm_minimization(transition.flat_chart(), 4.0, -1.0, 1.0, step=1 / 64,
                                                  maxiter=3)
    assert res.lower_bound_only and not res.converged


def test_transition_nested_constraints_coarse():
    ch = transition.flat_chart()
    wide = transition.transition_norm_minimization(ch, 4.0, -1.0, 1.0, step=1 / 64, free=(0.13, 0.245))
    narrow = transition.transition_norm_minimization(ch, 4.0, -1.0, 1.0, step=1 / 64, free=(0.16, 0.215))
    assert wide.norm <= narrow.norm * (1 + 1e-6)


def test_transition_parameter_guards():
    with pytest.raises(ParameterError):
        transition.TransitionProblem(transition.flat_chart(), 1 / 64, 1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        transition.TransitionProblem(transition.flat_chart(), 1 / 64, 4.0, 0.0, 1.0, free=(0.1, 0.2))
