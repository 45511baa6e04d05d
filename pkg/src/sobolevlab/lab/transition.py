"""Least W^{2,p} cost of moving between two constants across an annulus of the spiked surface."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import spsolve

from ..calculus import Mesh
from ..errors import ParameterError
from ..geometry import MetricChart, euclidean_chart, graph_chart
from ..report import DecayCurve, ExperimentReport, InequalityCheck
from ..spikes import R_MAX, SpikeProfile, build_spiked, certify_concavity

MU = 1e-8


def _shift(mesh: Mesh, di: int, dj: int) -> sparse.csr_matrix:
    """Sparse operator (S u)[i, j] = u[i + di, j + dj], zero where that leaves the lattice."""
    n0, n1 = mesh.shape
    I, J = np.meshgrid(np.arange(n0), np.arange(n1), indexing="ij")
    ok = (I + di >= 0) & (I + di < n0) & (J + dj >= 0) & (J + dj < n1)
    rows = (I * n1 + J)[ok]
    cols = ((I + di) * n1 + (J + dj))[ok]
    N = n0 * n1
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))


def derivative_operators(mesh: Mesh) -> dict:
    """Central second-order stencils for first and second partials on a 2-D lattice."""
    hx, hy = mesh.h
    S = {(a, b): _shift(mesh, a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}
    return {
        "x": (S[1, 0] - S[-1, 0]) / (2 * hx),
        "y": (S[0, 1] - S[0, -1]) / (2 * hy),
        "xx": (S[1, 0] - 2 * S[0, 0] + S[-1, 0]) / hx**2,
        "yy": (S[0, 1] - 2 * S[0, 0] + S[0, -1]) / hy**2,
        "xy": (S[1, 1] - S[1, -1] - S[-1, 1] + S[-1, -1]) / (4 * hx * hy),
    }


@dataclass
class TransitionResult:
    norm: float
    norm_p: float
    seminorm_sum: float
    surrogate_gap: float
    field: np.ndarray
    feasible: bool
    converged: bool
    lower_bound_only: bool
    iterations: int
    grad_norm: float
    volume: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "field"}
        return d


class TransitionProblem:
    """Discretized ||phi||_{W^{2,p}(D)}^p = int_D |phi|^p + |grad phi|^p + |Hess phi|^p.

    D = {rho_0 <= |x| <= rho_1} is the norm domain.  phi = a for |x| <= r_in and
    phi = b for |x| >= r_out; nodes in between are free.
    """

    def __init__(self, chart: MetricChart, step: float, p: float, a: float, b: float,
                 domain=(0.115, 0.26), free=(0.13, 0.245), mu: float = MU):
        if p <= 1:
            raise ParameterError("p must exceed 1")
        rho0, rho1 = domain
        r_in, r_out = free
        if not rho0 <= r_in < r_out <= rho1:
            raise ParameterError("need rho_0 <= r_in < r_out <= rho_1")
        self.p, self.a, self.b, self.mu = float(p), float(a), float(b), mu
        self.domain, self.free_band = (float(rho0), float(rho1)), (float(r_in), float(r_out))
        ext = rho1 + 3 * step
        n = int(math.ceil(ext / step))
        lo = (-n * step,) * 2
        hi = (n * step,) * 2
        self.mesh = mesh = Mesh(chart, lower=lo, upper=hi, shape=(2 * n + 1, 2 * n + 1))
        r = np.linalg.norm(mesh.points, axis=-1).ravel()
        self.in_D = (r >= rho0) & (r <= rho1)
        if np.any(mesh.mask.ravel()[_stencil_closure(mesh, self.in_D)]):
            raise ParameterError("norm domain stencil touches excluded nodes")
        self.free = (r > r_in) & (r < r_out)
        self.fixed_values = np.where(r <= r_in, self.a, self.b)
        ops = derivative_operators(mesh)
        rows = np.flatnonzero(self.in_D)
        self.D = {k: v[rows] for k, v in ops.items()}
        self.rows = rows
        self.w = (mesh.sqrt_det.ravel() * mesh.cell)[rows]
        self.ginv = mesh.ginv.reshape(-1, 2, 2)[rows]
        self.gamma = mesh.gamma.reshape(-1, 2, 2, 2)[rows]   # gamma[k, i, j] = Gamma^k_ij
        self.volume = float(self.w.sum())
        self.free_idx = np.flatnonzero(self.free)

    # -- evaluation -------------------------------------------------------

    def assemble(self, x: np.ndarray) -> np.ndarray:
        phi = self.fixed_values.copy()
        phi[self.free_idx] = x
        return phi

    def _parts(self, phi):
        D = self.D
        f0 = phi[self.rows]
        d = np.stack([D["x"] @ phi, D["y"] @ phi], -1)
        dd = np.empty((len(f0), 2, 2))
        dd[:, 0, 0] = D["xx"] @ phi
        dd[:, 1, 1] = D["yy"] @ phi
        dd[:, 0, 1] = dd[:, 1, 0] = D["xy"] @ phi
        H = dd - np.einsum("nkij,nk->nij", self.gamma, d)
        gu = np.einsum("nij,nj->ni", self.ginv, d)
        Hu = np.einsum("nia,njb,nab->nij", self.ginv, self.ginv, H)
        return f0, d, H, gu, Hu

    def objective(self, x: np.ndarray, mu: Optional[float] = None):
        mu = self.mu if mu is None else mu
        p = self.p
        phi = self.assemble(x)
        f0, d, H, gu, Hu = self._parts(phi)
        q0 = f0 * f0 + mu
        q1 = np.einsum("ni,ni->n", gu, d) + mu
        q2 = np.einsum("nij,nij->n", Hu, H) + mu
        J = float(self.w @ (q0 ** (p / 2) + q1 ** (p / 2) + q2 ** (p / 2)))
        c0 = self.w * p * q0 ** (p / 2 - 1)
        c1 = self.w * p * q1 ** (p / 2 - 1)
        c2 = self.w * p * q2 ** (p / 2 - 1)
        Y = c2[:, None, None] * Hu
        Dm = self.D
        g = np.zeros(len(phi))
        g[self.rows] += c0 * f0
        gx = c1 * gu[:, 0] - np.einsum("nij,nij->n", self.gamma[:, 0], Y)
        gy = c1 * gu[:, 1] - np.einsum("nij,nij->n", self.gamma[:, 1], Y)
        g += Dm["x"].T @ gx + Dm["y"].T @ gy
        g += Dm["xx"].T @ Y[:, 0, 0] + Dm["yy"].T @ Y[:, 1, 1] + Dm["xy"].T @ (Y[:, 0, 1] + Y[:, 1, 0])
        return J, g[self.free_idx]

    def report(self, x: np.ndarray) -> dict:
        p = self.p
        phi = self.assemble(x)
        f0, d, H, gu, Hu = self._parts(phi)
        m0 = np.abs(f0)
        m1 = np.sqrt(np.maximum(np.einsum("ni,ni->n", gu, d), 0))
        m2 = np.sqrt(np.maximum(np.einsum("nij,nij->n", Hu, H), 0))
        parts = [float(self.w @ m**p) for m in (m0, m1, m2)]
        return {"norm_p": sum(parts), "seminorms": [s ** (1 / p) for s in parts]}

    def harmonic_start(self) -> np.ndarray:
        """Flat five-point harmonic interpolation of the band values into the free region."""
        mesh = self.mesh
        n0, n1 = mesh.shape
        N = n0 * n1
        L = sum(_shift(mesh, a, b) for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1))) - 4 * sparse.eye(N)
        L = L.tocsr()
        fi = self.free_idx
        fixed = np.setdiff1d(np.arange(N), fi)
        A = L[fi][:, fi]
        rhs = -(L[fi][:, fixed] @ self.fixed_values[fixed])
        return spsolve(A.tocsc(), rhs)


def _stencil_closure(mesh: Mesh, sel: np.ndarray) -> np.ndarray:
    from ..calculus import _dilate

    grid = sel.reshape(mesh.shape)
    out = _dilate(grid, 1)
    # diagonal neighbours of the mixed stencil
    out = out | np.roll(np.roll(grid, 1, 0), 1, 1) | np.roll(np.roll(grid, 1, 0), -1, 1)
    out = out | np.roll(np.roll(grid, -1, 0), 1, 1) | np.roll(np.roll(grid, -1, 0), -1, 1)
    return out.ravel()


def transition_norm_minimization(chart: MetricChart, p: float, a: float, b: float,
                                 step: float = 1 / 256, domain=(0.115, 0.26), free=(0.13, 0.245),
                                 seed: Optional[int] = None, maxiter: int = 20000,
                                 gtol: float = 1e-6, mu: float = MU) -> TransitionResult:
    """Minimize the discretized W^{2,p} norm under band constraints by L-BFGS from the harmonic start.

    ``gtol`` is relative to the gradient at the start.  An unconverged run is
    flagged ``lower_bound_only``.
    """
    prob = TransitionProblem(chart, step, p, a, b, domain, free, mu)
    x0 = prob.harmonic_start()
    if seed is not None:
        x0 = x0 + 1e-3 * (abs(b - a) + 1) * np.random.default_rng(seed).standard_normal(len(x0))
    J0, g0 = prob.objective(x0)
    scale = max(J0, 1e-300)
    res = optimize.minimize(lambda x: tuple(v / scale for v in prob.objective(x)), x0, jac=True,
                            method="L-BFGS-B",
                            options={"maxiter": maxiter, "maxfun": 2 * maxiter, "ftol": 1e-15,
                                     "gtol": 1e-30, "maxcor": 20})
    x = res.x
    J, g = prob.objective(x)
    gnorm = float(np.linalg.norm(g) / max(np.linalg.norm(g0), 1e-300))
    converged = gnorm <= gtol or (res.success and gnorm <= 1e3 * gtol)
    rep = prob.report(x)
    phi = prob.assemble(x)
    fixed = ~prob.free
    feasible = bool(np.all(phi[fixed] == prob.fixed_values[fixed]))
    return TransitionResult(
        norm=rep["norm_p"] ** (1 / p), norm_p=rep["norm_p"], seminorm_sum=float(sum(rep["seminorms"])),
        surrogate_gap=float(J - rep["norm_p"]), field=phi.reshape(prob.mesh.shape),
        feasible=feasible, converged=bool(converged), lower_bound_only=not converged,
        iterations=int(res.nit), grad_norm=gnorm, volume=prob.volume,
        meta={"p": p, "a": a, "b": b, "step": step, "domain": list(domain), "free": list(free),
              "chart": chart.kind, "message": str(res.message), "start_objective": J0})


# ---------------------------------------------------------------------------
# spike-count sweep


def equal_total_profiles(counts: Sequence[int], annulus=(1.0 / 9.0, R_MAX), eta_bar: float = 0.02,
                         delta_ratio: float = 0.1) -> dict:
    """Spiked profiles whose amplitudes are scaled so every count carries the same total.

    Each profile is first built with the largest certified amplitudes; all are
    then scaled to the smallest of those totals.  Scaling toward the base keeps
    the Hessian negative definite because it is affine in the amplitudes.
    """
    built = {c: (build_spiked(c, annulus, eta_bar, delta_ratio=delta_ratio) if c else SpikeProfile(annulus=annulus))
             for c in counts}
    totals = [prof.total_amplitude for c, prof in built.items() if c]
    target = min(totals) if totals else 0.0
    out = {}
    for c, prof in built.items():
        if c:
            s = target / prof.total_amplitude
            bumps = tuple(type(bm)(bm.center, bm.eps, bm.eta * s, bm.delta) for bm in prof.bumps)
            prof = SpikeProfile(prof.base, bumps, prof.annulus, prof.apex_exclusion)
            step = min(min(bm.delta for bm in bumps) / 2, 1 / 400)
            if not certify_concavity(prof, step).valid:
                raise ParameterError("scaled profile lost concavity")
        out[c] = prof
    return out


def spiked_chart(profile: SpikeProfile) -> MetricChart:
    return graph_chart(profile.surface(), (-R_MAX, -R_MAX), (R_MAX, R_MAX),
                       params={"profile": profile.to_dict()})


def spike_sweep(counts: Sequence[int] = (0, 4, 8, 16), p: float = 4.0, a: float = -1.0, b: float = 1.0,
                step: float = 1 / 512, noise: float = 0.02, gain: float = 0.2, **kw) -> ExperimentReport:
    """Minimal transition norm against spike count at fixed total amplitude (exploratory)."""
    counts = sorted(int(c) for c in counts)
    profiles = equal_total_profiles(counts)
    rows, results = [], {}
    for c in counts:
        res = transition_norm_minimization(spiked_chart(profiles[c]), p, a, b, step=step, **kw)
        results[c] = res
        rows.append({"spikes": c, "total_eta": profiles[c].total_amplitude, **res.to_dict(),
                     "meta": None})
    vals = [results[c].norm for c in counts]
    checks = [InequalityCheck(f"nondecreasing_{c0}_to_{c1}", (1 - noise) * v0, v1, 0.0,
                              {"exploratory": True}, enforce=False)
              for (c0, v0), (c1, v1) in zip(zip(counts, vals), zip(counts[1:], vals[1:]))]
    checks.append(InequalityCheck("gain_last_over_first", (1 + gain) * vals[0], vals[-1], 0.0,
                                  {"exploratory": True}, enforce=False))
    curve = DecayCurve("minimal_norm", counts, vals, {"p": p, "a": a, "b": b})
    return ExperimentReport("transition_spike_sweep", rows, checks, [curve],
                            meta={"counts": counts, "step": step, "exploratory": True})


def flat_chart() -> MetricChart:
    return euclidean_chart(2, (-R_MAX, -R_MAX), (R_MAX, R_MAX))
