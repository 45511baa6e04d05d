"""Named operations that turn a JSON parameter block into an ExperimentReport.

Each operation returns ``(report, objects)`` where ``objects`` maps object ids to
``{"type": ..., "data": ...}`` records that the CLI stores for describe/export.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import geometry as geo
from .calculus import (Mesh, SymTensorField, D_S, D_S_star, bochner_laplacian, inner_product,
                       lp_norm, sampson_laplacian, tensor_field, weitzenbock_action)
from .cutoffs import CutoffFamily, LambdaSpec, ModelManifold, verify_cutoff
from .errors import ParameterError
from .lab import bochner, cone, density, doubling, regularity, transition
from .lab.fields import RadialBump, gaussian_windowed_bump, random_bumps, sample
from .report import DecayCurve, ExperimentReport, InequalityCheck
from .spikes import SpikeProfile, build_spiked, certify_concavity

OPERATIONS: dict[str, Callable] = {}


def operation(name: str):
    def deco(fn):
        OPERATIONS[name] = fn
        return fn
    return deco


def _order_check(name, values, steps, required, prov=None):
    values = np.asarray(values, float)
    orders = np.log(values[:-1] / values[1:]) / np.log(np.asarray(steps[:-1]) / np.asarray(steps[1:]))
    order = float(np.polyfit(np.log(steps), np.log(values), 1)[0])
    curve = DecayCurve(name, sorted(1.0 / np.asarray(steps)), values, {"steps": list(steps)})
    check = InequalityCheck(f"{name}_order", required, order, 0.0,
                            dict(prov or {}, pairwise_orders=orders.tolist(), values=values.tolist()))
    return check, curve


def _chart(spec) -> geo.MetricChart:
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "flat":
        kind = "euclidean"
    if kind == "hyperbolic":
        kind = "klein"
    return geo.CHART_BUILDERS[kind](**spec)


# ---------------------------------------------------------------------------
# geometry


@operation("curvature_oracle")
def op_curvature(n_points: int = 100, dim: int = 3, radius: float = 0.9, n_gauss: int = 40,
                 gauss_annulus=(1 / 9, 0.22), fd_step: float = 1 / 256, seed: int = 0,
                 klein_tol: float = 1e-6, gauss_tol: float = 1e-3):
    rng = np.random.default_rng(seed)
    ch = geo.klein_chart(dim, 0.99)
    pts = rng.normal(size=(n_points, dim))
    pts *= (radius * rng.uniform(0, 1, n_points) ** (1 / dim) / np.linalg.norm(pts, axis=1))[:, None]
    errs, rows = [], []
    for x in pts:
        rep = geo.curvature(ch, x, n_random=10, rng=rng)
        err = max(abs(s + 1) for s in rep.sectional_values)
        errs.append(err)
    rows.append({"route": "klein_closed_form", "points": n_points, "max_error": max(errs)})
    surf = SpikeProfile().surface()
    gch = geo.graph_chart(surf, (-geo.SQRT3, -geo.SQRT3), (geo.SQRT3, geo.SQRT3), fd_step=fd_step)
    r = np.sqrt(rng.uniform(gauss_annulus[0] ** 2, gauss_annulus[1] ** 2, n_gauss))
    t = rng.uniform(0, 2 * math.pi, n_gauss)
    gpts = np.stack([r * np.cos(t), r * np.sin(t)], -1)
    reps = [geo.curvature(gch, x, n_random=10, rng=rng) for x in gpts]
    gauss_min = min(min(float(geo.gauss_sectional(surf, x, X, Y)) for X, Y in geo.sample_planes(2, 10, rng))
                    for x in gpts)
    resid = max(rp.gauss_equation_residual for rp in reps)
    rows.append({"route": "bigraph", "points": n_gauss, "sectional_min": min(rp.sectional_min for rp in reps),
                 "gauss_sectional_min": gauss_min, "max_residual": resid})
    prov = {"fd_step": fd_step, "annulus": list(gauss_annulus)}
    checks = [
        InequalityCheck("klein_sectional_error", max(errs), klein_tol, 0.0, {"dim": dim}),
        InequalityCheck("bigraph_sectional_above_minus_one", max(-gauss_min, 0.0), 1.0, 0.0, prov),
        InequalityCheck("gauss_route_residual", resid, gauss_tol, 0.0, prov),
    ]
    return ExperimentReport("curvature_oracle", rows, checks), {}


@operation("volume_oracle")
def op_volume(radii=(0.5, 1.0, 2.0), cone_tol: float = 0.01, ball_tol: float = 0.005):
    upper = geo.volume(geo.cone_K_chart(), rtol=1e-6)
    cone_vol = 2 * upper
    rows = [{"object": "double_cone_K", "volume": cone_vol, "literal_value": 4 * math.pi,
             "half_cylinder_oracle": geo.cone_volume_oracle(2)}]
    checks = [
        InequalityCheck("cone_volume_vs_4pi", abs(cone_vol / (4 * math.pi) - 1), cone_tol, 0.0,
                        {"oracle": "unit half-cylinder"}),
        InequalityCheck("cone_volume_vs_half_cylinder_oracle",
                        abs(cone_vol / geo.cone_volume_oracle(2) - 1), cone_tol, 0.0,
                        {"oracle": "half-cylinder of radius 1/sqrt(2)"}),
    ]
    ch = geo.klein_polar_chart(0.99)
    for rho in radii:
        v = geo.volume(ch, region=((0.0, 0.0), (math.tanh(rho), 2 * math.pi)), rtol=1e-6)
        exact = geo.hyperbolic_ball_volume(rho, 2)
        rows.append({"object": f"hyperbolic_ball_{rho:g}", "volume": v, "closed_form": exact})
        checks.append(InequalityCheck(f"hyperbolic_ball_{rho:g}", abs(v / exact - 1), ball_tol, 0.0))
    return ExperimentReport("volume_oracle", rows, checks), {}


@operation("build_profile")
def op_build_profile(count: int = 5, eta_bar: float = 0.02, delta_ratio: float = 0.1, id: str = "profile"):
    prof = build_spiked(count, eta_bar=eta_bar, delta_ratio=delta_ratio)
    step = min(min((b.delta for b in prof.bumps), default=0.01) / 2, 0.005)
    cert = certify_concavity(prof, step)
    rows = [{"bumps": len(prof.bumps), "total_eta": prof.total_amplitude, "min_neg_eig": cert.min_neg_eig,
             "cone_margin": cert.cone_margin, "certificate_valid": cert.valid}]
    checks = [InequalityCheck("concavity_certificate", 0.0 if cert.valid else 1.0, 1.0, -0.5,
                              {"step": step})]
    objects = {id: {"type": "spike_profile", "data": prof.to_dict()}}
    return ExperimentReport("build_profile", rows, checks), objects


# ---------------------------------------------------------------------------
# regularity lemma and p = 1 identity


def _test_fields(charts, n_bumps, seed, step, radial):
    for spec in charts:
        chart = _chart(spec)
        lower = upper = None
        if chart.kind == "euclidean":
            lower, upper = (-1.0, -1.0), (1.0, 1.0)
        mesh = Mesh(chart, step=step, lower=lower, upper=upper)
        bumps = random_bumps(n_bumps, seed=seed)
        fields = [(f"{chart.kind}_bump{i}", b) for i, b in enumerate(bumps)]
        if radial:
            if chart.kind == "klein":
                fields.append((f"{chart.kind}_radial", RadialBump("klein", 0.9)))
            else:
                fields.append((f"{chart.kind}_gaussian", gaussian_windowed_bump()))
        for fid, b in fields:
            f = sample(mesh, b)
            if not mesh.support_margin_ok(f.values):
                raise ParameterError(f"test field {fid} reaches the lattice edge")
            yield chart, fid, f


@operation("regularity_lemma")
def op_regularity(charts=("flat", {"kind": "klein", "radius": 0.8}), p_list=(1.2, 1.5, 2.0),
                  n_bumps: int = 10, seed: int = 0, step: float = 1 / 128, R: float = 0.3,
                  r: float = 0.5, tolerance: float = 0.05, ibp_tol: float = 1e-3, radial: bool = True):
    checks, rows = [], []
    for chart, fid, f in _test_fields(charts, n_bumps, seed, step, radial):
        for p in p_list:
            for c in regularity.check_regularity_lemma(f, p, R, r, tolerance=tolerance, field_id=fid):
                c.name = f"{fid}_p{p:g}_{c.name}"
                checks.append(c)
                rows.append({"field": fid, "p": p, "check": c.name, "lhs": c.lhs, "rhs": c.rhs,
                             "ratio": c.ratio})
            if p == 2:
                d = regularity.integration_by_parts_defect(f)
                checks.append(InequalityCheck(f"{fid}_ibp", d, ibp_tol, 0.0, {"field": fid}))
                rows.append({"field": fid, "p": p, "check": "ibp", "lhs": d, "rhs": ibp_tol, "ratio": d / ibp_tol})
    return ExperimentReport("regularity_lemma", rows, checks), {}


@operation("p1_identity")
def op_p1(charts=("flat", {"kind": "klein", "radius": 0.8}), eps_list=(1e-1, 1e-2, 1e-3),
          n_bumps: int = 10, seed: int = 0, step: float = 1 / 128, tolerance: float = 0.05,
          radial: bool = True):
    checks, rows = [], []
    for chart, fid, f in _test_fields(charts, n_bumps, seed, step, radial):
        for c in regularity.check_p1_identities(f, eps_list, tolerance, fid):
            c.name = f"{fid}_{c.name}"
            checks.append(c)
            rows.append({"field": fid, "check": c.name, "lhs": c.lhs, "rhs": c.rhs, "ratio": c.ratio,
                         "monotone_in_eps": c.provenance["lhs_monotone_in_eps"]})
    return ExperimentReport("p1_identity", rows, checks), {}


# ---------------------------------------------------------------------------
# identities under refinement


def _sphere_region(mesh):
    P = mesh.points
    return (P[..., 0] > 0.8) & (P[..., 0] < 2.3) & (P[..., 1] > 0.2) & (P[..., 1] < 1.8)


def _sphere_T(x):
    th, ph = x[..., 0], x[..., 1]
    out = np.zeros(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = np.sin(ph) * np.cos(th)
    out[..., 0, 1] = out[..., 1, 0] = np.sin(th) ** 2 * np.cos(2 * ph)
    out[..., 1, 1] = np.sin(th) ** 2 * (1 + 0.5 * np.sin(th + ph))
    return out


def _window(x, c=0.0, rad=0.6):
    q = np.sum((x - c) ** 2, -1) / rad**2
    return np.clip(1 - q, 0, None) ** 6


def _adj_h(x):
    w = _window(x)
    return np.stack([w * np.cos(3 * x[..., 1]), w * (1 + x[..., 0])], -1)


def _adj_T(x):
    w = _window(x, 0.05)
    out = np.zeros(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = w * np.sin(2 * x[..., 0])
    out[..., 1, 1] = w * x[..., 1]
    out[..., 0, 1] = out[..., 1, 0] = w * np.cos(3 * x[..., 0] * x[..., 1])
    return out


def sampson_residual(step: float) -> float:
    m = Mesh(geo.sphere_chart((0.5, 2.6), (0.0, 2.0)), step=step)
    T = SymTensorField.from_full(tensor_field(m, _sphere_T, 2))
    S, B, W = sampson_laplacian(T), bochner_laplacian(T), weitzenbock_action(T)
    D = SymTensorField(m, 2, S.components - B.components + W.components, S.flagged | B.flagged)
    return lp_norm(D, 2, _sphere_region(m))


def adjointness_defect(step: float) -> float:
    m = Mesh(geo.klein_chart(2, 0.8), step=step)
    h = tensor_field(m, _adj_h, 1)
    T = SymTensorField.from_full(tensor_field(m, _adj_T, 2))
    a = inner_product(D_S(h), T)
    b = 2 * inner_product(h, D_S_star(T))
    return abs(a - b) / abs(a)


@operation("identities")
def op_identities(steps=(1 / 64, 1 / 128, 1 / 256), tensor_steps=(1 / 32, 1 / 64, 1 / 128), seed: int = 3,
                  bochner_order: float = 1.0, sampson_order: float = 1.9, adjoint_order: float = 1.9):
    steps, tsteps = list(steps), list(tensor_steps)
    b = random_bumps(1, seed=seed)[0]
    flat = [bochner.bochner_residual(sample(Mesh(geo.euclidean_chart(2), step=h), b)) for h in steps]
    sph = []
    for h in steps:
        m = Mesh(geo.sphere_chart((0.5, 2.6), (0.0, 2.0)), step=h)
        u = m.sample(lambda x: np.cos(x[..., 0]))
        sph.append(bochner.bochner_residual(u, _sphere_region(m)))
    samp = [sampson_residual(h) for h in tsteps]
    adj = [adjointness_defect(h) for h in tsteps]
    checks, curves = [], []
    for name, vals, st, req in [("bochner_flat", flat, steps, bochner_order),
                                ("bochner_sphere", sph, steps, bochner_order),
                                ("sampson_sphere", samp, tsteps, sampson_order),
                                ("adjointness", adj, tsteps, adjoint_order)]:
        c, cv = _order_check(name, vals, st, req)
        checks.append(c)
        curves.append(cv)
    rows = [{"identity": cv.name, "step": s, "residual": v}
            for cv, st in zip(curves, [steps, steps, tsteps, tsteps]) for s, v in zip(st, cv.values)]
    return ExperimentReport("identities", rows, checks, curves), {}


# ---------------------------------------------------------------------------
# cut-offs and density


@operation("cutoff")
def op_cutoff(K: int = 1, k: int = 3, R_sweep=(10, 20, 30, 40), warp: str = "sinh", ratio_bound: float = 2.0):
    fam = CutoffFamily(LambdaSpec(K))
    rep = verify_cutoff(fam, ModelManifold(2, warp), R_sweep, k=k, ratio_bound=ratio_bound)
    return rep, {f"family_K{K}": {"type": "cutoff_family", "data": fam.to_dict()}}


@operation("density")
def op_density(cases=((2, 1.2), (2, 2.0), (3, 2.0)), R_sweep=tuple(range(6, 15)), K: int = 1,
               decay: float = 1.0, h: float = 0.01):
    fam = CutoffFamily(LambdaSpec(K))
    model = ModelManifold(2, "sinh")
    checks, rows, curves = [], [], []
    for k, p in cases:
        rep = density.density_experiment(model, fam, lambda r: np.exp(-decay * r), int(k), float(p),
                                         R_sweep, h=h)
        tag = f"k{int(k)}_p{float(p):g}"
        for c in rep.checks:
            c.name = f"{tag}_{c.name}"
        checks += rep.checks
        rows += [dict(case=tag, **r) for r in rep.rows]
        for cv in rep.curves:
            cv.name = f"{tag}_{cv.name}"
        curves += rep.curves
    return ExperimentReport("density", rows, checks, curves), {}


# ---------------------------------------------------------------------------
# doubling, cone, transition


@operation("doubling")
def op_doubling(chart="flat", center=(0.0, 0.0), radii=(0.5, 1.0), p: float = 2.0, step: float = 1 / 64,
                metric: str = "graph", lower=None, upper=None, tolerance: float = 0.02, seed: int = 0):
    ch = _chart(chart)
    rep = doubling.doubling_and_poincare(ch, center, radii, p, step=step, metric=metric, lower=lower,
                                         upper=upper, tolerance=tolerance, seed=seed)
    return rep, {}


@operation("cone")
def op_cone(thetas=(0.5, 1.0, 1.5, 2.0), step: float = 1 / 256, n_phi: int = 256, exponent_tol: float = 0.05,
            ratio_tol: float = 0.1, control_min: float = 0.95):
    """``thetas`` are multiples of pi."""
    checks, rows, curves = [], [], []
    for mult in thetas:
        th = float(mult) * math.pi
        cv = cone.cone_energy_decay(th, 1, step=step, n_phi=n_phi)
        cv.name = f"energy_ratio_theta{mult:g}pi"
        curves.append(cv)
        m = cv.meta
        rows.append({"theta_over_pi": mult, "fitted_exponent": m["fitted_exponent"],
                     "expected_exponent": m["expected_exponent"], "energy_ratio": float(cv.values[-1]),
                     "expected_ratio": m["expected_ratio"]})
        if abs(mult - 2.0) < 1e-12:
            checks.append(InequalityCheck("flat_control_no_decay", control_min, float(np.min(cv.values)), 0.0))
            continue
        checks.append(InequalityCheck(f"exponent_theta{mult:g}pi",
                                      abs(m["fitted_exponent"] / m["expected_exponent"] - 1), exponent_tol, 0.0))
        checks.append(InequalityCheck(f"energy_ratio_theta{mult:g}pi",
                                      float(np.max(np.abs(cv.values / m["expected_ratio"] - 1))), ratio_tol, 0.0))
    return ExperimentReport("cone", rows, checks, curves), {}


@operation("transition_width")
def op_transition_width(p: float = 4.0, a: float = -1.0, b: float = 1.0, step: float = 1 / 256,
                        widths=(0.05, 0.08, 0.115), center: float = 0.1875, domain=(0.115, 0.26),
                        tolerance: float = 1e-3):
    """Flat annulus; nested free regions of growing width inside a fixed norm domain."""
    ch = transition.flat_chart()
    rows, vals = [], []
    for w in sorted(widths):
        res = transition.transition_norm_minimization(ch, p, a, b, step=step, domain=domain,
                                                      free=(center - w / 2, center + w / 2))
        vals.append(res.norm)
        rows.append({"width": w, **res.to_dict(), "meta": None})
    checks = [InequalityCheck(f"widening_{w1:g}_to_{w2:g}", v2, v1, tolerance, {"nested": True})
              for (w1, v1), (w2, v2) in zip(zip(sorted(widths), vals), zip(sorted(widths)[1:], vals[1:]))]
    const = transition.transition_norm_minimization(ch, p, 1.0, 1.0, step=step, domain=domain,
                                                    free=(center - widths[0] / 2, center + widths[0] / 2))
    rows.append({"width": widths[0], "a": 1.0, "b": 1.0, "norm": const.norm,
                 "volume_root": const.volume ** (1 / p)})
    checks.append(InequalityCheck("constant_data_norm", abs(const.norm / const.volume ** (1 / p) - 1),
                                  tolerance, 0.0))
    curve = DecayCurve("minimal_norm_vs_width", sorted(widths), vals, {"p": p})
    return ExperimentReport("transition_width", rows, checks, [curve]), {}


@operation("transition_spikes")
def op_transition_spikes(counts=(0, 4, 8, 16), p: float = 4.0, a: float = -1.0, b: float = 1.0,
                         step: float = 1 / 256, noise: float = 0.02, gain: float = 0.2):
    rep = transition.spike_sweep(counts, p, a, b, step=step, noise=noise, gain=gain)
    return rep, {}


@operation("noop")
def op_noop(**_):
    return ExperimentReport("noop"), {}
