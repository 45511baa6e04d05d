import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from sobolevlab import geometry as geo
from sobolevlab.errors import DomainError
from sobolevlab.spikes import SpikeProfile


def test_klein_metric_origin_is_identity():
    assert np.allclose(geo.klein_metric(np.zeros(3)), np.eye(3))


def test_klein_metric_blows_up_near_boundary():
    top = [np.linalg.eigvalsh(geo.klein_metric([r, 0.0])).max() for r in (0.9, 0.99, 0.999)]
    assert top[0] < top[1] < top[2] and top[2] > 1e5


def test_klein_metric_outside_ball_raises():
    with pytest.raises(DomainError):
        geo.klein_metric([0.8, 0.7])


def test_klein_metric_matches_symbolic_formula(rng):
    y = sp.symbols("y0:3")
    s = sum(v * v for v in y)
    G = sp.Matrix(3, 3, lambda i, j: sp.KroneckerDelta(i, j) / (1 - s) + y[i] * y[j] / (1 - s) ** 2)
    f = sp.lambdify(y, G)
    for _ in range(5):
        p = rng.uniform(-0.5, 0.5, 3)
        assert np.allclose(geo.klein_metric(p), np.array(f(*p), float), atol=1e-14)


def test_induced_metric_affine_graph_in_flat_space():
    a = np.array([0.3, -0.7])
    surf = geo.GraphHypersurface(geo.AmbientModel("euclidean", 3), geo.AffineProfile(tuple(a)))
    g = geo.induced_metric(surf, np.array([0.1, 0.2]))
    assert np.allclose(g, np.eye(2) + np.outer(a, a), atol=1e-14)


def test_induced_metric_near_axis_close_to_flat_pullback():
    surf = SpikeProfile().surface()
    x = np.array([0.12, 0.03])
    g = geo.induced_metric(surf, x)
    df = SpikeProfile().gradient(x)
    flat = np.eye(2) + np.outer(df, df)
    y = surf.embed(x)
    distortion = 1.0 / (1.0 - y @ y) ** 2
    assert np.all(np.linalg.eigvalsh(g) > 0) and np.allclose(g, g.T)
    assert np.all(np.abs(g - flat) <= (distortion - 1.0) * np.abs(flat).max() + 1e-12)


def test_christoffel_vanish_flat_and_at_klein_origin():
    assert np.allclose(geo.christoffel(geo.euclidean_chart(2), [0.3, 0.4]), 0)
    assert np.allclose(geo.christoffel(geo.klein_chart(3), np.zeros(3)), 0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.55, 0.55), min_size=3, max_size=3))
def test_klein_sectional_curvature_is_minus_one(p):
    rep = geo.curvature(geo.klein_chart(3), np.array(p), n_random=6)
    assert max(abs(s + 1) for s in rep.sectional_values) < 1e-8


def test_flat_and_sphere_curvature():
    assert abs(geo.curvature(geo.euclidean_chart(2), [0.1, 0.2]).sectional_min) < 1e-12
    rep = geo.curvature(geo.sphere_chart(), [1.2, 0.5], n_random=4)
    assert max(abs(s - 1) for s in rep.sectional_values) < 1e-6


def test_halfspace_curvature_is_minus_one():
    ch = geo.poincare_halfspace_chart(2, (-1.0, 0.5), (1.0, 2.0))
    rep = geo.curvature(ch, [0.2, 1.1], n_random=4)
    assert max(abs(s + 1) for s in rep.sectional_values) < 1e-8


def test_riemann_symmetries_klein(rng):
    rep, Rm, _ = geo.curvature(geo.klein_chart(3), rng.uniform(-0.4, 0.4, 3), full=True)
    res = geo.symmetry_residuals(Rm)
    assert max(res.values()) < 1e-10


def test_flat_unit_square_volume():
    assert geo.volume(geo.euclidean_chart(2, (0.0, 0.0), (1.0, 1.0))) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("rho", [0.5, 1.0])
def test_hyperbolic_ball_volume_polar_klein(rho):
    ch = geo.klein_polar_chart(0.99)
    v = geo.volume(ch, region=((0.0, 0.0), (math.tanh(rho), 2 * math.pi)), rtol=1e-7)
    assert v == pytest.approx(geo.hyperbolic_ball_volume(rho, 2), rel=1e-4)


def test_hyperbolic_ball_volume_general_dimension():
    for rho in (0.3, 1.0):
        assert geo.hyperbolic_ball_volume(rho, 3) == pytest.approx(
            4 * math.pi * (math.sinh(2 * rho) / 4 - rho / 2), rel=1e-12)
        assert geo.hyperbolic_ball_volume(rho, 4) > 0


def test_volume_touching_boundary_raises():
    with pytest.raises(DomainError):
        geo.volume(geo.klein_polar_chart(0.99), region=((0.0, 0.0), (1.0, 2 * math.pi)))


def test_cone_volume_matches_closed_form_oracle():
    v = 2 * geo.volume(geo.cone_K_chart(), rtol=1e-7)
    assert v == pytest.approx(geo.cone_volume_oracle(2), rel=1e-5)
    # analytic lateral area of the Euclidean-radius description
    assert geo.cone_volume_oracle(2) == pytest.approx(2 * math.sqrt(2) * math.pi, rel=1e-14)


def test_cone_volume_oracle_limits():
    with pytest.raises(DomainError):
        geo.cone_volume_oracle(1)
    assert geo.cone_volume_oracle(60) < 1e-10
    assert geo.half_cylinder_volume(2) == pytest.approx(4 * math.pi)


def test_chart_roundtrip():
    ch = geo.klein_chart(2, 0.9)
    again = geo.MetricChart.from_dict(ch.to_dict())
    x = np.array([0.2, -0.3])
    assert np.allclose(again.metric_at(x), ch.metric_at(x))


def test_point_outside_chart_raises():
    with pytest.raises(DomainError):
        geo.curvature(geo.klein_chart(2, 0.9), [0.95, 0.0])
