"""Integral gradient estimates for L^p functions with L^p Laplacian, and the p = 1 regularization."""
from __future__ import annotations

import numpy as np

from ..calculus import (DiscreteField, gradient, inner_product, integrate, laplacian, lp_norm)
from ..errors import ParameterError
from ..report import InequalityCheck
from .fields import chart_distance

P_GUARD = 1.05


def _provenance(f: DiscreteField, field_id, **extra) -> dict:
    m = f.mesh
    d = {"step": m.step, "chart": m.chart.kind, "field": field_id}
    d.update(extra)
    return d


def power_field(f: DiscreteField, p: float) -> DiscreteField:
    """|f|^{p/2} sampled at the nodes."""
    return DiscreteField(f.mesh, np.abs(f.values) ** (p / 2.0), f.flagged.copy())


def check_regularity_lemma(f: DiscreteField, p: float, R: float, r: float, center=None,
                           tolerance: float = 0.05, field_id=None) -> list:
    """Local, global and (for p <= 2) chained gradient estimates as measured ratios.

    Returns [local, global] plus, for p <= 2, the two links of the chain
    ||grad f||_p^2 <= (4/p^2)||f||_p^{2-p} ||grad |f|^{p/2}||_2^2 <= ||f||_p ||Lap f||_p / (p-1).
    The chain checks are reported but not enforced for p < 1.05.
    """
    if p <= 1:
        raise ParameterError("the gradient estimate needs p > 1; use check_p1_identities for p = 1")
    if not 0 < R < r:
        raise ParameterError("need 0 < R < r")
    mesh = f.mesh
    dist = np.full(mesh.shape, np.inf)
    good = ~mesh.mask
    dist[good] = chart_distance(mesh.chart, mesh.points[good], center)
    inner, outer = dist < R, dist < r

    grad_f = gradient(f)
    lap_f = laplacian(f)
    grad_w = gradient(power_field(f, p))
    w2 = grad_w.norm_pointwise() ** 2

    prov = _provenance(f, field_id, p=p, R=R, r=r)
    lhs_a = 4 * (p - 1) / p**2 * integrate(mesh, w2, grad_w.valid & inner)
    rhs_a = lp_norm(f, p, outer) ** (p - 1) * (lp_norm(grad_f, p, outer) / (r - R)
                                              + lp_norm(lap_f, p, outer))
    checks = [InequalityCheck("local", lhs_a, rhs_a, tolerance, prov)]

    f_p, lap_p = lp_norm(f, p), lp_norm(lap_f, p)
    grad_w2 = integrate(mesh, w2, grad_w.valid)
    checks.append(InequalityCheck("global", grad_w2, p**2 / (4 * (p - 1)) * f_p ** (p - 1) * lap_p,
                                  tolerance, prov))
    if p <= 2:
        enforce = p >= P_GUARD
        cprov = dict(prov, guard=None if enforce else f"p < {P_GUARD}: reported only")
        mid = 4 / p**2 * f_p ** (2 - p) * grad_w2
        checks.append(InequalityCheck("gradient_chain_1", lp_norm(grad_f, p) ** 2, mid,
                                      tolerance, cprov, enforce))
        checks.append(InequalityCheck("gradient_chain_2", mid, f_p * lap_p / (p - 1),
                                      tolerance, cprov, enforce))
    return checks


def integration_by_parts_defect(f: DiscreteField) -> float:
    """| ||grad f||^2 + <f, Lap f> | / ||grad f||^2 for compactly supported f."""
    g = gradient(f)
    a = lp_norm(g, 2) ** 2
    b = -inner_product(f, laplacian(f))
    if a == 0:
        return abs(b)
    return abs(a - b) / a


def check_p1_identities(f: DiscreteField, eps_list=(1e-1, 1e-2, 1e-3), tolerance: float = 0.05,
                        field_id=None) -> list:
    """int eps |grad f|^2 / (f^2 + eps)^{3/2} <= int |Lap f| for each eps."""
    mesh = f.mesh
    g = gradient(f)
    lap = laplacian(f)
    g2 = g.norm_pointwise() ** 2
    rhs = integrate(mesh, np.abs(lap.values), lap.valid)
    eps_sorted = sorted(eps_list, reverse=True)
    lhs = {e: integrate(mesh, e * g2 / (f.values**2 + e) ** 1.5, g.valid) for e in eps_sorted}
    seq = [lhs[e] for e in eps_sorted]
    monotone = bool(np.all(np.diff(seq) >= 0) or np.all(np.diff(seq) <= 0))
    return [InequalityCheck(f"p1_eps={e:g}", lhs[e], rhs, tolerance,
                            _provenance(f, field_id, eps=e, lhs_monotone_in_eps=monotone,
                                        lhs_by_decreasing_eps=seq))
            for e in eps_list]
