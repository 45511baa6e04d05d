"""Ball volumes, doubling ratios and Poincare constants on lattice charts."""
from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
from scipy import integrate, linalg, optimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..calculus import Mesh, _dilate
from ..errors import DomainError, ParameterError
from ..geometry import MetricChart, hyperbolic_ball_volume
from ..report import ExperimentReport, InequalityCheck
from .fields import chart_distance

OFFSETS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]


def lattice_distance(mesh: Mesh, source) -> np.ndarray:
    """Shortest-path distance from the node nearest ``source`` on the 16-neighbour lattice graph.

    Edge lengths use the metric at the edge midpoint.  Masked nodes are inf.
    """
    if mesh.dim != 2:
        raise ParameterError("lattice graph distances are implemented in two dimensions")
    shape = mesh.shape
    good = ~mesh.mask
    idx = -np.ones(shape, int)
    idx[good] = np.arange(good.sum())
    rows, cols, w = [], [], []
    for di, dj in OFFSETS:
        sa = (slice(max(0, -di), shape[0] - max(0, di)), slice(max(0, -dj), shape[1] - max(0, dj)))
        sb = (slice(max(0, di), shape[0] + min(0, di) or None),
              slice(max(0, dj), shape[1] + min(0, dj) or None))
        a, b = idx[sa], idx[sb]
        ok = (a >= 0) & (b >= 0)
        pa, pb = mesh.points[sa][ok], mesh.points[sb][ok]
        mid = 0.5 * (pa + pb)
        inside = mesh.chart.contains(mid)
        v = (pb - pa)[inside]
        g = mesh.chart.metric_at(mid[inside])
        rows.append(a[ok][inside])
        cols.append(b[ok][inside])
        w.append(np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v)))
    rows, cols, w = map(np.concatenate, (rows, cols, w))
    n = int(good.sum())
    G = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    src = _nearest_node(mesh, source)
    if idx[src] < 0:
        raise DomainError("ball center is outside the chart")
    d = dijkstra(G, directed=False, indices=idx[src])
    out = np.full(shape, np.inf)
    out[good] = d
    return out


def _nearest_node(mesh: Mesh, z) -> tuple:
    z = np.asarray(z, float)
    return tuple(int(round((z[k] - mesh.lower[k]) / mesh.h[k])) for k in range(mesh.dim))


def distance_field(mesh: Mesh, center, metric: str = "graph") -> np.ndarray:
    if metric == "graph":
        return lattice_distance(mesh, center)
    if metric == "exact":
        d = np.full(mesh.shape, np.inf)
        good = ~mesh.mask
        d[good] = chart_distance(mesh.chart, mesh.points[good], center)
        return d
    raise ParameterError(f"unknown metric {metric!r}")


def ball_weights(mesh: Mesh, d: np.ndarray, rho: float) -> np.ndarray:
    """Quadrature weights of B_rho with fractional boundary cells.

    A node's coverage is 1/2 + (rho - d)/(h |grad d|_1), clipped to [0, 1], so the
    volume error comes from curvature of the sphere, not from node counting.
    """
    edge = np.zeros(mesh.shape, bool)
    for ax in range(mesh.dim):
        sl = [slice(None)] * mesh.dim
        sl[ax] = [0, -1]
        edge[tuple(sl)] = True
    rim = edge | (_dilate(mesh.mask, 1) if mesh.mask.any() else np.zeros(mesh.shape, bool))
    if np.any(rim & (d <= rho)):
        raise DomainError(f"ball of radius {rho} escapes the chart domain")
    finite = np.where(np.isfinite(d), d, 0.0)
    grads = np.gradient(finite, *mesh.h)
    spread = sum(np.abs(gk) * hk for gk, hk in zip(grads, mesh.h))
    with np.errstate(divide="ignore", invalid="ignore"):
        cover = np.clip(0.5 + (rho - finite) / spread, 0.0, 1.0)
    # plain indicator where the stencil sees the lattice edge or the mask
    cover = np.where(_dilate(rim, 1), (d <= rho).astype(float), np.nan_to_num(cover))
    return cover * mesh.sqrt_det * mesh.cell


def neumann_disk_oracle(m: int = 1) -> float:
    """1/sqrt(mu) for the first Neumann eigenvalue of mode m on the unit disk.

    Shoots u'' + u'/r + (mu - m^2/r^2) u = 0 from the regular solution u ~ r^m and
    solves u'(1) = 0 in sqrt(mu), i.e. the first positive zero of J_m'.
    """
    def slope(k):
        r0 = 1e-6
        y0 = [r0**m, m * r0 ** (m - 1)]
        sol = integrate.solve_ivp(
            lambda r, y: [y[1], -y[1] / r - (k * k - m * m / (r * r)) * y[0]],
            (r0, 1.0), y0, rtol=1e-12, atol=1e-14)
        return sol.y[1, -1]

    ks = np.linspace(0.05, 10.0, 400)
    vals = [slope(k) for k in ks]
    for a, b, fa, fb in zip(ks, ks[1:], vals, vals[1:]):
        if fa * fb < 0:
            return 1.0 / optimize.brentq(slope, a, b, xtol=1e-14)
    raise RuntimeError("no sign change in the shooting slope")


def _basis(points, center, r: float, degree: int):
    """Monomials in (x - center)/r up to ``degree`` without the constant, with chart gradients."""
    x = (points - np.asarray(center)) / r
    vals, grads = [], []
    for a, b in itertools.product(range(degree + 1), repeat=2):
        if 0 < a + b <= degree:
            vals.append(x[..., 0] ** a * x[..., 1] ** b)
            ga = a * x[..., 0] ** max(a - 1, 0) * x[..., 1] ** b / r
            gb = b * x[..., 0] ** a * x[..., 1] ** max(b - 1, 0) / r
            grads.append(np.stack([ga, gb], axis=-1))
    return np.stack(vals, -1), np.stack(grads, -2)


def poincare_constant(mesh: Mesh, weights: np.ndarray, center, r: float, p: float,
                      degree: int = 7, n_random: int = 64, seed: int = 0) -> dict:
    """Largest ||psi - mean||_p / (r ||grad psi||_p) found over polynomial test fields on the ball.

    p = 2 uses the Rayleigh-Ritz eigenvalue over the whole span; otherwise a random dip of
    fields followed by a local ascent from the best one.
    """
    sel = weights > 0
    w = weights[sel]
    V, G = _basis(mesh.points[sel], center, r, degree)
    E = mesh.frame[sel]
    V = V - (w @ V / w.sum())
    # orthonormalize the span in the weighted L^2 product for conditioning
    Q, Rr = np.linalg.qr(V * np.sqrt(w)[:, None])
    keep = np.abs(np.diag(Rr)) > 1e-10 * np.abs(Rr).max()
    T = linalg.solve_triangular(Rr[np.ix_(keep, keep)], np.eye(int(keep.sum())))
    V = V[:, keep] @ T
    # gradients in an orthonormal frame: |grad psi| is the Euclidean norm of the last axis
    G = np.einsum("nbi,bc,nia->nca", G[:, keep], T, E, optimize=True)

    def ratio(c):
        psi = V @ c
        psi = psi - (w @ psi) / w.sum()
        gn = np.linalg.norm(np.einsum("nba,b->na", G, c), axis=-1)
        num = (w @ np.abs(psi) ** p) ** (1 / p)
        den = r * (w @ gn**p) ** (1 / p)
        return num / den if den > 0 else 0.0

    out = {"basis_size": int(V.shape[1])}
    rng = np.random.default_rng(seed)
    trials = [ratio(c) for c in rng.normal(size=(n_random, V.shape[1]))]
    out["random_max"] = float(max(trials))
    if p == 2:
        A = sum((G[:, :, a] * w[:, None]).T @ G[:, :, a] for a in range(G.shape[2]))
        M = np.eye(V.shape[1])
        mu = linalg.eigh(A, M, eigvals_only=True)[0]
        out["ritz"] = float(1.0 / (r * math.sqrt(mu)))
        out["constant"] = max(out["ritz"], out["random_max"])
    else:
        best = rng.normal(size=V.shape[1])
        res = optimize.minimize(lambda c: -ratio(c / np.linalg.norm(c)), best, method="L-BFGS-B",
                                options={"maxiter": 200})
        out["ascent"] = float(-res.fun)
        out["constant"] = max(out["ascent"], out["random_max"])
    return out


def reverse_doubling_constant(R: float, n: int = 2, m: int = 400) -> float:
    """inf over 0 < r < s <= R of (V(r)/V(s)) / (r/s)^n, attained as r -> 0."""
    s = np.linspace(R / m, R, m)
    unit = hyperbolic_ball_volume(1e-6, n) / 1e-6**n
    return float(min(unit * si**n / hyperbolic_ball_volume(si, n) for si in s))


def doubling_and_poincare(chart: MetricChart, center, radii: Sequence[float], p: float = 2.0,
                          step: float = 1 / 64, metric: str = "graph", degree: int = 7,
                          n_random: int = 64, seed: int = 0, tolerance: float = 0.02,
                          lower=None, upper=None) -> ExperimentReport:
    """Doubling ratios, reverse-doubling comparison and empirical Poincare constants on balls."""
    if p < 1:
        raise ParameterError("p must be at least 1")
    radii = sorted(float(r) for r in radii)
    mesh = Mesh(chart, step=step, lower=lower, upper=upper)
    d = distance_field(mesh, center, metric)
    n = chart.dim
    vols, rows, checks = {}, [], []

    def vol(rho):
        if rho not in vols:
            vols[rho] = float(np.sum(ball_weights(mesh, d, rho)))
        return vols[rho]

    flat = chart.kind == "euclidean"
    oracle = neumann_disk_oracle() if flat and n == 2 and p == 2 else None
    prov = {"chart": chart.kind, "step": mesh.step, "metric": metric, "center": list(center)}
    for r in radii:
        row = {"r": r, "vol": vol(r)}
        try:
            row["vol_2r"] = vol(2 * r)
            row["doubling_ratio"] = row["vol_2r"] / row["vol"]
        except DomainError:
            row["vol_2r"] = row["doubling_ratio"] = None
        pc = poincare_constant(mesh, ball_weights(mesh, d, r), center, r, p, degree, n_random, seed)
        row.update({f"poincare_{k}": v for k, v in pc.items()})
        rows.append(row)
        if flat and row["doubling_ratio"] is not None:
            checks.append(InequalityCheck(f"doubling_r={r:g}", abs(row["doubling_ratio"] / 2**n - 1),
                                          tolerance, 0.0, dict(prov, expected=2**n)))
        if oracle is not None:
            row["poincare_oracle"] = oracle
            checks.append(InequalityCheck(f"poincare_r={r:g}", abs(pc["constant"] / oracle - 1), 0.1,
                                          0.0, dict(prov, oracle=oracle)))
    Rmax = radii[-1]
    Cp = reverse_doubling_constant(Rmax, n)
    for r, s in itertools.combinations(radii, 2):
        measured = vol(r) / vol(s)
        model = hyperbolic_ball_volume(r, n) / hyperbolic_ball_volume(s, n)
        rows.append({"r": r, "s": s, "vol_ratio": measured, "model_ratio": model,
                     "power_bound": Cp * (r / s) ** n})
        checks.append(InequalityCheck(f"reverse_doubling_r={r:g}_s={s:g}", model, measured,
                                      tolerance, dict(prov, C_prime=Cp)))
    meta = {"chart": chart.to_dict(), "p": p, "metric": metric, "C_prime": Cp,
            "volumes": {f"{k:g}": v for k, v in sorted(vols.items())}}
    return ExperimentReport("doubling_and_poincare", rows, checks, meta=meta)
