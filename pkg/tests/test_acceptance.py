"""One pass/fail test per acceptance criterion, at the stated tolerances.

Each test runs the same operation the bundled ``acceptance`` suite runs.
"""
import math
import time

import pytest

from sobolevlab import experiments as ex


def run(name, **params):
    t0 = time.perf_counter()
    rep, objects = ex.OPERATIONS[name](**params)
    return rep, time.perf_counter() - t0


def failing(rep):
    return [(c.name, c.lhs, c.rhs, c.ratio) for c in rep.checks if c.enforce and not c.passed]


def by_name(rep, name):
    return next(c for c in rep.checks if c.name == name)


def test_curvature_oracle():
    rep, dt = run("curvature_oracle", n_points=100, fd_step=1 / 256)
    assert by_name(rep, "klein_sectional_error").lhs <= 1e-6
    assert rep.rows[1]["gauss_sectional_min"] > -1 and rep.rows[1]["sectional_min"] > -1
    assert by_name(rep, "gauss_route_residual").lhs <= 1e-3
    assert dt <= 60 and not failing(rep)


def test_volume_oracle():
    rep, dt = run("volume_oracle", radii=(0.5, 1.0, 2.0))
    cone = rep.rows[0]
    for rho in (0.5, 1.0, 2.0):
        assert by_name(rep, f"hyperbolic_ball_{rho:g}").lhs <= 0.005
    assert dt <= 60
    # literal closed form 4*pi for the double cone K with n = 2
    assert abs(cone["volume"] / (4 * math.pi) - 1) <= 0.01, cone


def test_regularity_lemma_suite():
    rep, dt = run("regularity_lemma", charts=("flat", {"kind": "klein", "radius": 0.8}),
                  p_list=(1.2, 1.5, 2.0), n_bumps=10, step=1 / 128)
    fields = {row["field"] for row in rep.rows}
    assert sum(f.startswith("euclidean_bump") for f in fields) == 10
    assert sum(f.startswith("klein_bump") for f in fields) == 10
    ratios = [c.ratio for c in rep.checks if not c.name.endswith("_ibp")]
    assert ratios and max(ratios) <= 1.05
    ibp = [c for c in rep.checks if c.name.endswith("_ibp")]
    assert len(ibp) == len(fields) and all(c.lhs <= 1e-3 for c in ibp)
    assert dt <= 300 and not failing(rep)


def test_p1_identity():
    rep, dt = run("p1_identity", eps_list=(1e-1, 1e-2, 1e-3), n_bumps=10, step=1 / 128)
    names = [c.name for c in rep.checks]
    for eps in ("0.1", "0.01", "0.001"):
        assert any(n.endswith(f"p1_eps={eps}") for n in names)
    assert max(c.ratio for c in rep.checks) <= 1.05 and not failing(rep)


def test_identity_residuals():
    rep, dt = run("identities", steps=(1 / 64, 1 / 128, 1 / 256))
    assert by_name(rep, "bochner_flat_order").rhs >= 1.0
    assert by_name(rep, "bochner_sphere_order").rhs >= 1.0
    assert by_name(rep, "sampson_sphere_order").rhs >= 1.9
    adj = by_name(rep, "adjointness_order")
    assert adj.rhs >= 1.9
    vals, steps = adj.provenance["values"], (1 / 32, 1 / 64, 1 / 128)
    C = vals[0] / steps[0] ** 2
    assert all(v <= C * h**2 * 1.05 for v, h in zip(vals, steps))
    assert not failing(rep)


def test_cutoff_suite():
    rep, dt = run("cutoff", K=1, k=3, R_sweep=(10, 20, 30, 40))
    for key in ("sup_grad_lambda", "sup_lap", "sup_hess_lambda", "sup_lap_grad"):
        vals = [row[key] for row in rep.rows]
        assert max(vals) / min(vals) <= 2.0, (key, vals)


def test_density_decay():
    rep, dt = run("density", cases=((2, 1.2), (2, 2.0), (3, 2.0)), R_sweep=tuple(range(6, 15)))
    for tag in ("k2_p1.2", "k2_p2", "k3_p2"):
        total = next(c for c in rep.curves if c.name == f"{tag}_total")
        assert list(total.grid) == list(range(6, 15))
        assert total.trend >= 0.9 and total.final_ratio <= 0.1, tag
    assert dt <= 600 and not failing(rep)


def test_cone_decay():
    rep, dt = run("cone", thetas=(0.5, 1.0, 1.5, 2.0), step=1 / 256)
    for row in rep.rows:
        if row["theta_over_pi"] < 2:
            alpha = 2 / row["theta_over_pi"] - 1
            assert abs(row["fitted_exponent"] / alpha - 1) <= 0.05
            assert abs(row["energy_ratio"] / 2 ** (-2 * alpha) - 1) <= 0.10
        else:
            assert row["energy_ratio"] >= 0.95
    assert not failing(rep)


@pytest.mark.slow
def test_counterexample_mechanism_probe():
    rep, dt = run("transition_spikes", counts=(0, 4, 8, 16), p=4.0, a=-1.0, b=1.0)
    assert dt <= 900
    assert [row["spikes"] for row in rep.rows] == [0, 4, 8, 16]
    assert all(row["converged"] and row["feasible"] for row in rep.rows)
    # exploratory: the margins are recorded in the report and never fail the suite
    assert rep.checks and not any(c.enforce for c in rep.checks)
    assert rep.passed and rep.curves[0].name == "minimal_norm"


def test_doubling_poincare():
    flat, _ = run("doubling", chart={"kind": "euclidean", "lower": [-2.125, -2.125], "upper": [2.125, 2.125]},
                  radii=(0.5, 1.0), step=1 / 64)
    hyp, _ = run("doubling", chart={"kind": "klein", "radius": 0.975}, radii=(0.25, 0.5, 1.0, 2.0),
                 step=1 / 256)
    for r in ("0.5", "1"):
        assert by_name(flat, f"doubling_r={r}").lhs <= 0.02
    assert by_name(flat, "poincare_r=1").lhs <= 0.10
    rev = [c for c in hyp.checks if c.name.startswith("reverse_doubling")]
    assert len(rev) >= 6 and all(c.passed for c in rev)
    assert not failing(flat) and not failing(hyp)
