"""Iterated-logarithm weights, rotationally symmetric models and Laplacian cut-offs.

A cut-off is ``chi_R(r) = eta(A(r) - A(R))`` with ``A' = 1/lambda`` and ``eta``
the reversed quintic smoothstep, so ``chi_R = 1`` on ``[0, R]`` and vanishes
once ``A(r) >= A(R) + 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import sympy as sp
from scipy import integrate

from .errors import ParameterError
from .report import ExperimentReport, InequalityCheck


def iterated_exp(k: int, x: float = 1.0) -> float:
    for _ in range(k):
        x = math.exp(x)
    return x


@lru_cache(maxsize=None)
def _symbolic(K: int):
    t = sp.symbols("t", positive=True)
    lam = t
    L = t
    for _ in range(K):
        L = sp.log(L)
        lam = lam * L
    antider = sp.log(L)  # d/dt ln^{[K+1]} t = 1/lambda
    return t, lam, antider


@lru_cache(maxsize=None)
def _lambdified(K: int):
    t, lam, _ = _symbolic(K)
    return tuple(sp.lambdify(t, sp.diff(lam, t, j), "numpy") for j in range(3))


def reciprocal_diverges(K: int) -> bool:
    """Symbolic check that ln^{[K+1]} is an antiderivative of 1/lambda and tends to infinity."""
    t, lam, antider = _symbolic(K)
    ok_deriv = sp.simplify(sp.diff(antider, t) - 1 / lam) == 0
    return bool(ok_deriv and sp.limit(antider, t, sp.oo) == sp.oo)


@dataclass(frozen=True)
class LambdaSpec:
    """lambda(t) = t prod_{j<=K} ln^{[j]} t for t >= t0, exp(cubic) below t0.

    The cubic Q matches ln lambda and two derivatives at t0 and has Q'(0) = 0.
    """

    K: int = 1
    t0: Optional[float] = None

    def __post_init__(self):
        if self.K < 0:
            raise ParameterError("K must be nonnegative")
        if self.t0 is None:
            object.__setattr__(self, "t0", iterated_exp(self.K, 1.0))
        if self.t0 < iterated_exp(self.K, 1.0) * (1 - 1e-12):
            raise ParameterError("t0 must satisfy ln^{[K]}(t0) >= 1")

    def _upper(self, t, j):
        return np.asarray(_lambdified(self.K)[j](t), dtype=float) * np.ones_like(t)

    @property
    def cubic(self) -> np.ndarray:
        return _cubic(self.K, self.t0)

    def derivs(self, t):
        """lambda, lambda', lambda'' at t (array)."""
        t = np.asarray(t, dtype=float)
        lo = t < self.t0
        tu = np.where(lo, self.t0, t)
        lam = self._upper(tu, 0)
        d1 = self._upper(tu, 1)
        d2 = self._upper(tu, 2)
        if np.any(lo):
            a, b, c, d = self.cubic
            tl = np.where(lo, t, 0.0)
            Q = a + b * tl + c * tl**2 + d * tl**3
            Q1 = b + 2 * c * tl + 3 * d * tl**2
            Q2 = 2 * c + 6 * d * tl
            e = np.exp(Q)
            lam = np.where(lo, e, lam)
            d1 = np.where(lo, e * Q1, d1)
            d2 = np.where(lo, e * (Q2 + Q1 * Q1), d2)
        return lam, d1, d2

    def __call__(self, t):
        return self.derivs(t)[0]

    def A(self, r):
        """A(r) = int_0^r ds / lambda(s)."""
        r = np.asarray(r, dtype=float)
        At0 = _A_t0(self.K, self.t0)
        hi = At0 + _lnk(np.maximum(r, self.t0), self.K + 1) - _lnk(self.t0, self.K + 1)
        if np.any(r < self.t0):
            lo = np.vectorize(lambda x: integrate.quad(lambda s: 1.0 / self(s), 0.0, x)[0])(
                np.minimum(r, self.t0))
            return np.where(r < self.t0, lo, hi)
        return hi

    def A_inverse(self, s):
        """Inverse of A on [A(t0), inf)."""
        s = np.asarray(s, dtype=float)
        At0 = _A_t0(self.K, self.t0)
        if np.any(s < At0 - 1e-14):
            raise ParameterError("A_inverse is only provided above A(t0)")
        return _expk(s - At0 + _lnk(self.t0, self.K + 1), self.K + 1)

    def to_dict(self):
        return {"K": self.K, "t0": self.t0, "cubic": [float(c) for c in self.cubic]}


def _lnk(t, k):
    t = np.asarray(t, dtype=float)
    for _ in range(k):
        t = np.log(t)
    return t


def _expk(s, k):
    s = np.asarray(s, dtype=float)
    for _ in range(k):
        s = np.exp(s)
    return s


@lru_cache(maxsize=None)
def _cubic(K: int, t0: float) -> np.ndarray:
    f = _lambdified(K)
    lam, d1, d2 = (float(f[j](t0)) for j in range(3))
    L0, L1, L2 = math.log(lam), d1 / lam, d2 / lam - (d1 / lam) ** 2
    # Q = a + c t^2 + d t^3 (b = 0)
    M = np.array([[1.0, t0**2, t0**3], [0.0, 2 * t0, 3 * t0**2], [0.0, 2.0, 6 * t0]])
    a, c, d = np.linalg.solve(M, [L0, L1, L2])
    return np.array([a, 0.0, c, d])


@lru_cache(maxsize=None)
def _A_t0(K: int, t0: float) -> float:
    spec = LambdaSpec(K, t0)
    return integrate.quad(lambda s: 1.0 / float(spec(s)), 0.0, t0, epsabs=1e-13, epsrel=1e-13)[0]


def lambda_eval(spec: LambdaSpec, t) -> np.ndarray:
    return spec(t)


# ---------------------------------------------------------------------------
# shape function


def eta(s, order: int = 0):
    """Reversed quintic smoothstep 1 - (6s^5 - 15s^4 + 10s^3) and its derivatives."""
    s = np.asarray(s, dtype=float)
    x = np.clip(s, 0.0, 1.0)
    inside = (s > 0) & (s < 1)
    if order == 0:
        return 1.0 - (6 * x**5 - 15 * x**4 + 10 * x**3)
    polys = {1: -30 * x**2 * (x - 1) ** 2,
             2: -60 * x * (2 * x * x - 3 * x + 1),
             3: -60 * (6 * x * x - 6 * x + 1)}
    return np.where(inside, polys[order], 0.0)


ETA1_MAX = 1.875
ETA2_MAX = 10.0 / math.sqrt(3.0)


# ---------------------------------------------------------------------------
# model manifolds


@dataclass(frozen=True)
class ModelManifold:
    """dr^2 + phi(r)^2 g_{S^{n-1}} with phi in {sinh r, r}."""

    n: int = 2
    warp: str = "sinh"

    def __post_init__(self):
        if self.warp not in ("sinh", "identity"):
            raise ParameterError(f"unsupported warping {self.warp!r}")

    def log_phi(self, r):
        r = np.asarray(r, dtype=float)
        if self.warp == "identity":
            return np.log(r)
        return r + np.log1p(-np.exp(-2 * r)) - math.log(2.0)

    def kappa(self, r):
        """phi'/phi."""
        r = np.asarray(r, dtype=float)
        return 1.0 / np.tanh(r) if self.warp == "sinh" else 1.0 / r

    def phi2_over_phi(self, r):
        r = np.asarray(r, dtype=float)
        return np.ones_like(r) if self.warp == "sinh" else np.zeros_like(r)

    def kappa_prime(self, r):
        return self.phi2_over_phi(r) - self.kappa(r) ** 2

    def ricci_radial_at(self, r):
        return -(self.n - 1) * self.phi2_over_phi(r)

    def ricci_tangential_at(self, r):
        r = np.asarray(r, dtype=float)
        k = self.kappa(r)
        # (phi'^2 - 1)/phi^2 = kappa^2 - 1/phi^2
        inv_phi2 = np.exp(-2 * self.log_phi(r))
        return -(self.phi2_over_phi(r) + (self.n - 2) * (k * k - inv_phi2))

    def ricci_constant(self, spec: LambdaSpec, r_max: float = 1e4) -> float:
        """Smallest C with Ric >= -C lambda^2 on a log-spaced grid up to r_max."""
        r = np.geomspace(1e-3, r_max, 4000)
        ric = np.minimum(self.ricci_radial_at(r), self.ricci_tangential_at(r))
        return float(np.max(np.maximum(-ric, 0.0) / spec(r) ** 2))

    @property
    def curvature_parallel(self) -> bool:
        """Whether the curvature tensor is parallel (space forms)."""
        return True

    def volume_density(self, r):
        """phi^{n-1} times the sphere area, in log form."""
        from .geometry import sphere_area

        return math.log(sphere_area(self.n)) + (self.n - 1) * self.log_phi(r)

    def to_dict(self):
        return {"n": self.n, "warp": self.warp}


# ---------------------------------------------------------------------------
# cut-offs


@dataclass(frozen=True)
class CutoffFamily:
    lam: LambdaSpec = field(default_factory=LambdaSpec)
    eta_order: int = 5

    def to_dict(self):
        return {"lambda": self.lam.to_dict(), "eta_order": self.eta_order}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        lam = d.get("lambda", {})
        return cls(LambdaSpec(lam.get("K", 1), lam.get("t0")), d.get("eta_order", 5))


@dataclass(frozen=True)
class Cutoff:
    """chi_R as a radial function with closed-form derivatives up to order three."""

    family: CutoffFamily
    R: float

    @property
    def lam(self) -> LambdaSpec:
        return self.family.lam

    @property
    def A_R(self) -> float:
        return float(self.lam.A(self.R))

    @property
    def support_radius(self) -> float:
        return float(self.lam.A_inverse(self.A_R + 1.0))

    def s(self, r):
        return self.lam.A(r) - self.A_R

    def value(self, r):
        return eta(self.s(r))

    def derivs(self, r):
        """chi, chi', chi'', chi''' at r."""
        r = np.asarray(r, dtype=float)
        s = self.s(r)
        e0, e1, e2, e3 = (eta(s, k) for k in range(4))
        lam, l1, l2 = self.lam.derivs(r)
        c1 = e1 / lam
        c2 = e2 / lam**2 - e1 * l1 / lam**2
        c3 = (e3 / lam**3 - 3 * e2 * l1 / lam**3 - e1 * l2 / lam**2
              + 2 * e1 * l1**2 / lam**3)
        return e0, c1, c2, c3

    def laplacian(self, model: ModelManifold, r):
        _, c1, c2, _ = self.derivs(r)
        return c2 + (model.n - 1) * model.kappa(r) * c1

    def hessian_norm(self, model: ModelManifold, r):
        _, c1, c2, _ = self.derivs(r)
        return np.sqrt(c2**2 + (model.n - 1) * (model.kappa(r) * c1) ** 2)

    def rough_laplacian_gradient(self, model: ModelManifold, r):
        """Radial component of tr nabla^2 (grad chi) = grad(Delta chi) + Ric(grad chi)."""
        _, c1, c2, c3 = self.derivs(r)
        k = model.kappa(r)
        dlap = c3 + (model.n - 1) * (model.kappa_prime(r) * c1 + k * c2)
        return dlap + model.ricci_radial_at(r) * c1

    def transition_grid(self, m: int = 4001):
        """Radii where 0 <= A(r) - A(R) <= 1, equally spaced in that variable."""
        s = np.linspace(0.0, 1.0, m)
        return self.lam.A_inverse(self.A_R + s)


def build_cutoff(family: CutoffFamily, R: float) -> Cutoff:
    if R < family.lam.t0:
        raise ParameterError(f"R={R} is below the threshold t0={family.lam.t0}")
    return Cutoff(family, float(R))


def verify_cutoff(family: CutoffFamily, model: ModelManifold, R_sweep: Sequence[float],
                  k: int = 2, m: int = 4001, discrete: bool = True,
                  ratio_bound: float = 2.0) -> ExperimentReport:
    """Measure the cut-off bounds over a sweep of R and flag uniformity.

    Sups are taken over the transition region (elsewhere every derivative
    vanishes).  The ``discrete`` column recomputes Delta chi from sampled chi
    with the radial finite-difference operators.
    """
    from .calculus import RadialMesh

    if any(R < family.lam.t0 for R in R_sweep):
        raise ParameterError("sweep contains R below t0")
    if k > 2 and not model.curvature_parallel:
        raise ParameterError("k = 3 needs recorded curvature-derivative bounds")
    rows = []
    for R in R_sweep:
        c = build_cutoff(family, R)
        r = c.transition_grid(m)
        lam = family.lam(r)
        _, c1, c2, _ = c.derivs(r)
        row = {"R": float(R), "support_radius": c.support_radius,
               "sup_grad_lambda": float(np.max(np.abs(c1) * lam)),
               "sup_lap": float(np.max(np.abs(c.laplacian(model, r))))}
        if discrete:
            mesh = RadialMesh(r, model)
            row["sup_lap_discrete"] = float(np.max(np.abs(mesh.laplacian(c.value(r))[2:-2])))
        if k >= 3:
            row["sup_hess_lambda"] = float(np.max(c.hessian_norm(model, r) * lam))
            row["sup_lap_grad"] = float(np.max(np.abs(c.rough_laplacian_gradient(model, r))))
        rows.append(row)
    keys = ["sup_grad_lambda", "sup_lap"] + (["sup_hess_lambda", "sup_lap_grad"] if k >= 3 else [])
    checks = []
    for key in keys:
        vals = np.array([row[key] for row in rows])
        checks.append(InequalityCheck(f"{key}_max_over_min", float(vals.max()),
                                      ratio_bound * float(vals.min()), 0.0,
                                      {"quantity": key, "model": model.to_dict()}))
    meta = {
        "family": family.to_dict(),
        "model": model.to_dict(),
        "ricci_constant": model.ricci_constant(family.lam),
        "eta1_max": ETA1_MAX,
        "eta2_max": ETA2_MAX,
        "uniform": all(ch.passed for ch in checks),
        "nonincreasing": {key: bool(np.all(np.diff([row[key] for row in rows]) <= 1e-9
                                           * max(row[key] for row in rows))) for key in keys},
    }
    return ExperimentReport("verify_cutoff", rows, checks, meta=meta)


def lap_bound_terms(family: CutoffFamily, model: ModelManifold, R: float, m: int = 4001) -> dict:
    """Factors of the a priori bound max|eta''| sup 1/lambda^2 + max|eta'| (sup lambda'/lambda^2 + sup kappa (n-1)/lambda)."""
    c = build_cutoff(family, R)
    r = c.transition_grid(m)
    lam, l1, _ = family.lam.derivs(r)
    terms = {
        "sup_inv_lambda2": float(np.max(1 / lam**2)),
        "sup_dlambda_over_lambda2": float(np.max(np.abs(l1) / lam**2)),
        "sup_lap_r_over_lambda": float(np.max((model.n - 1) * model.kappa(r) / lam)),
    }
    terms["bound"] = (ETA2_MAX * terms["sup_inv_lambda2"]
                      + ETA1_MAX * (terms["sup_dlambda_over_lambda2"] + terms["sup_lap_r_over_lambda"]))
    terms["measured"] = float(np.max(np.abs(c.laplacian(model, r))))
    return terms
