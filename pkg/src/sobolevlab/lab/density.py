"""Truncation of radial W^{k,p} functions by Laplacian cut-offs on rotationally symmetric models."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..calculus import RadialMesh
from ..cutoffs import CutoffFamily, ModelManifold, build_cutoff
from ..errors import ParameterError
from ..report import DecayCurve, ExperimentReport, InequalityCheck

TAIL = 40.0


def hypothesis_flag(model: ModelManifold, family: CutoffFamily, k: int) -> tuple:
    """Whether Ric >= -C lambda^2 (and, for k = 3, bounded curvature derivatives) is recorded."""
    C = model.ricci_constant(family.lam)
    if not math.isfinite(C):
        return False, "Ricci curvature is not bounded below by -C lambda^2"
    if k == 3 and not model.curvature_parallel:
        return False, "k = 3 needs bounds on the curvature and its derivatives"
    return True, f"Ric >= -{C:.4g} lambda^2"


def _grid(R: float, p: float, h: float) -> np.ndarray:
    # |f|^p dvol ~ exp(-(p-1) r) for f = exp(-r) on the hyperbolic plane; stop once that is
    # exp(-TAIL) below its value at R
    span = TAIL / max(p - 1.0, 0.2)
    lo = max(R - 0.5, 1e-3)
    return np.arange(lo, R + span + h / 2, h)


def _mag(rm: RadialMesh, T):
    return rm.magnitude(T) if np.ndim(T) > 1 else np.abs(T)


def density_experiment(model: ModelManifold, family: CutoffFamily, f: Callable, k: int, p: float,
                       R_sweep: Sequence[float], h: float = 0.01, trend_min: float = 0.9,
                       final_max: float = 0.1) -> ExperimentReport:
    """Curves of ||chi_R f - f||_{W^{k,p}} and of each term in its Leibniz/Hoelder/Bochner bounds.

    ``f`` is a radial profile r -> f(r).  Checks per R: the total is dominated
    by the sum of the tracked terms, the Hoelder split bounds ||f Hess chi||_p
    (p <= 2), the Bochner integration identity closes, and the Kato-Young bound
    on the first Bochner term holds (1 < p <= 2).  Curve checks: decreasing
    trend >= ``trend_min`` and final/initial <= ``final_max``.
    """
    if k not in (2, 3):
        raise ParameterError("k must be 2 or 3")
    if not 1 <= p <= 2:
        raise ParameterError("p must lie in [1, 2]")
    ok, why = hypothesis_flag(model, family, k)
    if not ok:
        raise ParameterError(f"curvature hypothesis not met: {why}")
    R_sweep = [float(R) for R in R_sweep]
    rows, checks = [], []
    for R in R_sweep:
        c = build_cutoff(family, R)
        r = _grid(R, p, h)
        rm = RadialMesh(r, model)
        fv = np.asarray(f(r), float)
        chi = c.value(r)
        # membership of f in L^p: the integrand must have died out at the end of the grid
        dens = np.abs(fv) ** p * np.exp(model.log_phi(r))
        if not np.all(np.isfinite(dens)) or dens[-1] > 1e-8 * max(dens.max(), 1e-300):
            raise ParameterError("f is not numerically in L^p on this model")

        F = rm.nabla_power(fv, k)
        X = rm.nabla_power(chi, k)
        U = rm.nabla_power((chi - 1.0) * fv, k)
        Lp = lambda v: rm.integral(v ** p) ** (1.0 / p)
        one_minus = np.abs(1.0 - chi)
        m = [_mag(rm, T) for T in F]
        x = [_mag(rm, T) for T in X]

        row = {"R": R, "support_radius": c.support_radius}
        semis = [rm.lp_norm(T, p) if j else Lp(np.abs(U[0])) for j, T in enumerate(U)]
        row["total"] = float(sum(semis))
        row["conv1"] = Lp(one_minus * m[0])
        row["f_grad_chi"] = Lp(m[0] * x[1])
        row["one_minus_chi_grad_f"] = Lp(one_minus * m[1])
        row["grad_chi_grad_f"] = Lp(x[1] * m[1])
        row["one_minus_chi_hess_f"] = Lp(one_minus * m[2])
        row["f_hess_chi"] = Lp(m[0] * x[2])
        tracked = (row["conv1"] + row["f_grad_chi"] + row["one_minus_chi_grad_f"]
                   + 2 * row["grad_chi_grad_f"] + row["one_minus_chi_hess_f"] + row["f_hess_chi"])
        if k == 3:
            row["one_minus_chi_nabla3_f"] = Lp(one_minus * m[3])
            row["grad_chi_hess_f"] = Lp(x[1] * m[2])
            row["hess_chi_grad_f"] = Lp(x[2] * m[1])
            row["f_nabla3_chi"] = Lp(m[0] * x[3])
            tracked += (row["one_minus_chi_nabla3_f"] + 3 * row["grad_chi_hess_f"]
                        + 3 * row["hess_chi_grad_f"] + row["f_nabla3_chi"])
        row["tracked_sum"] = tracked
        prov = {"R": R, "step": h, "model": model.to_dict(), "k": k, "p": p}
        checks.append(InequalityCheck(f"triangle_R={R:g}", row["total"], tracked, 1e-6, prov))

        # Hoelder split and the Bochner side, all over M \ B_R
        fp = np.abs(fv) ** p
        outside = r >= R
        I_hess = rm.integral(fp * x[2] ** 2)
        mass_out = rm.integral(np.where(outside, fp, 0.0))
        holder = math.sqrt(I_hess) * mass_out ** ((2 - p) / (2 * p))
        row["holder_bound"] = holder
        checks.append(InequalityCheck(f"holder_R={R:g}", row["f_hess_chi"], holder, 1e-3, prov))

        d_fp = rm.d(fp)
        dchi = X[1][:, 0]
        lap_chi = rm.laplacian(chi)
        grad_sq = dchi**2
        t1 = -0.5 * rm.integral_signed(d_fp * rm.d(grad_sq))
        t_ric = -rm.integral_signed(fp * model.ricci_radial_at(r) * grad_sq)
        t_lap2 = rm.integral(fp * lap_chi**2)
        t_lapint = rm.integral_signed(lap_chi * d_fp * dchi)
        row.update(hess_weighted=I_hess, bochner_first=t1, bochner_ricci=t_ric,
                   bochner_lap_sq=t_lap2, bochner_lap_int=t_lapint,
                   int_2=t_ric + t_lap2 + t_lapint)
        row["bochner_defect"] = abs(I_hess - (t1 + t_ric + t_lap2 + t_lapint)) / max(I_hess, 1e-300)
        if p > 1:
            dw = 0.5 * p * np.abs(fv) ** (p / 2 - 1) * np.abs(F[1][:, 0])
            row["int_1_tail"] = 4 * rm.integral(np.where(outside, dw**2, 0.0))
            checks.append(InequalityCheck(f"int_1_R={R:g}", t1, 0.5 * I_hess + row["int_1_tail"],
                                          1e-3, prov))
        rows.append(row)

    names = [n for n in rows[0] if n not in ("R", "support_radius")]
    curves = [DecayCurve(n, R_sweep, [row[n] for row in rows], {"k": k, "p": p}) for n in names]
    total = curves[0]
    checks.append(InequalityCheck("total_trend", trend_min, total.trend, 0.0,
                                  {"statistic": "fraction of nonincreasing steps"}))
    checks.append(InequalityCheck("total_final_ratio", total.final_ratio, final_max, 0.0,
                                  {"statistic": "last/first"}))
    meta = {"model": model.to_dict(), "family": family.to_dict(), "k": k, "p": p,
            "hypothesis": why, "grid_step": h}
    return ExperimentReport("density_experiment", rows, checks, curves, meta)
