"""Metric charts, ambient hyperbolic models and curvature on coordinate patches.

Every metric function is vectorized: a point array of shape ``(..., n)`` maps
to metric coefficients of shape ``(..., n, n)``.  First partials are stored as
``dg[..., k, i, j] = d_k g_ij`` and second partials as
``ddg[..., k, l, i, j] = d_k d_l g_ij``.

Curvature follows ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`` with
``R_ijkl = g(R(d_i, d_j) d_k, d_l)``, so the sectional curvature of the plane
spanned by ``X, Y`` is ``R(X, Y, Y, X) / (|X|^2 |Y|^2 - <X, Y>^2)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError, ParameterError

SQRT3 = math.sqrt(3.0)


def sphere_area(n: int) -> float:
    """Volume of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def hyperbolic_ball_volume(rho: float, n: int = 2) -> float:
    """V_{-1}(rho): volume of a geodesic ball in the n-dimensional hyperbolic space."""
    if rho < 0:
        raise ParameterError("radius must be nonnegative")
    if n == 2:
        return 2.0 * math.pi * (math.cosh(rho) - 1.0)
    if n == 3:
        return math.pi * (math.sinh(2.0 * rho) - 2.0 * rho)
    val, _ = integrate.quad(lambda t: math.sinh(t) ** (n - 1), 0.0, rho)
    return sphere_area(n) * val


def half_cylinder_volume(n: int, radius: float = 1.0) -> float:
    """Volume of {|x| = radius, z > 1} in the Poincare half-space H^{n+1}, doubled.

    The induced metric is (radius^2 g_S + dz^2) / z^2, so each half cylinder has
    volume radius^(n-1) vol(S^{n-1}) / (n - 1).
    """
    if n < 2:
        raise DomainError("half-cylinder volume diverges for n < 2")
    return 2.0 * radius ** (n - 1) * sphere_area(n) / (n - 1)


def cone_volume_oracle(n: int) -> float:
    """Exact volume of the double cone K = {|x| = (1 - |z|)/sqrt(3)} in the Klein ball.

    Each cone is foliated by geodesics ending at an ideal point; sending that
    point to infinity turns it into the vertical cylinder of Euclidean radius
    1/sqrt(3) above height sqrt(2/3), which a dilation carries to
    {|x| = 1/sqrt(2), z > 1}.
    """
    if n < 2:
        raise DomainError("cone volume diverges for n < 2")
    return half_cylinder_volume(n, radius=1.0 / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# finite differences


def fd_partials(fn: Callable, x: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Centered partial derivatives of a vectorized map; derivative axis follows the batch axes."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    parts = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        if order == 2:
            d = (fn(x + e) - fn(x - e)) / (2.0 * h)
        elif order == 4:
            d = (-fn(x + 2 * e) + 8.0 * fn(x + e) - 8.0 * fn(x - e) + fn(x - 2 * e)) / (12.0 * h)
        elif order == 6:
            d = (fn(x + 3 * e) - 9.0 * fn(x + 2 * e) + 45.0 * fn(x + e)
                 - 45.0 * fn(x - e) + 9.0 * fn(x - 2 * e) - fn(x - 3 * e)) / (60.0 * h)
        else:
            raise ParameterError(f"unsupported stencil order {order}")
        parts.append(d)
    return np.stack(parts, axis=x.ndim - 1)


# ---------------------------------------------------------------------------
# closed-form metrics


def klein_metric(y) -> np.ndarray:
    """Beltrami-Klein metric |dy|^2/(1-|y|^2) + (y.dy)^2/(1-|y|^2)^2."""
    y = np.asarray(y, dtype=float)
    s = np.sum(y * y, axis=-1)
    if np.any(s >= 1.0):
        raise DomainError("Klein model is defined only on the open unit ball")
    w = 1.0 / (1.0 - s)
    n = y.shape[-1]
    eye = np.eye(n)
    return w[..., None, None] * eye + (w * w)[..., None, None] * y[..., :, None] * y[..., None, :]


def _klein_grad(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    s = np.sum(y * y, axis=-1)
    if np.any(s >= 1.0):
        raise DomainError("Klein model is defined only on the open unit ball")
    w = (1.0 / (1.0 - s))[..., None, None, None]
    n = y.shape[-1]
    d = np.eye(n)
    yk = y[..., :, None, None]
    yi = y[..., None, :, None]
    yj = y[..., None, None, :]
    return (2 * yk * w**2 * d[None, :, :] + 4 * yk * w**3 * yi * yj
            + w**2 * (d[:, :, None] * yj + yi * d[:, None, :]))


def _klein_hess(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    s = np.sum(y * y, axis=-1)
    if np.any(s >= 1.0):
        raise DomainError("Klein model is defined only on the open unit ball")
    w = (1.0 / (1.0 - s))[..., None, None, None, None]
    n = y.shape[-1]
    d = np.eye(n)
    # index order (l, k, i, j); symmetric in (l, k)
    yl = y[..., :, None, None, None]
    yk = y[..., None, :, None, None]
    yi = y[..., None, None, :, None]
    yj = y[..., None, None, None, :]
    d_kl = d[:, :, None, None]
    d_ij = d[None, None, :, :]
    d_il = d[:, None, :, None]
    d_jl = d[:, None, None, :]
    d_ik = d[None, :, :, None]
    d_jk = d[None, :, None, :]
    return ((2 * d_kl * w**2 + 8 * yk * yl * w**3) * d_ij
            + 4 * d_kl * w**3 * yi * yj
            + 24 * yk * yl * yi * yj * w**4
            + 4 * yk * w**3 * (d_il * yj + yi * d_jl)
            + 4 * yl * w**3 * (d_ik * yj + yi * d_jk)
            + w**2 * (d_ik * d_jl + d_il * d_jk))


def _halfspace_metric(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x[..., -1]
    if np.any(z <= 0):
        raise DomainError("Poincare half-space requires z > 0")
    n = x.shape[-1]
    return (1.0 / z**2)[..., None, None] * np.eye(n)


def _halfspace_grad(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x[..., -1]
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (n, n, n))
    out[..., n - 1, :, :] = (-2.0 / z**3)[..., None, None] * np.eye(n)
    return out


def _halfspace_hess(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x[..., -1]
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (n, n, n, n))
    out[..., n - 1, n - 1, :, :] = (6.0 / z**4)[..., None, None] * np.eye(n)
    return out


WARPINGS = {
    # name: (phi, phi', phi'')
    "identity": (lambda r: r, lambda r: np.ones_like(r), lambda r: np.zeros_like(r)),
    "sinh": (np.sinh, np.cosh, np.sinh),
    "sin": (np.sin, np.cos, lambda r: -np.sin(r)),
}


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True, eq=False)
class MetricChart:
    """A coordinate box carrying a Riemannian metric.

    ``exclusions`` are balls ``(center, radius)`` removed from the domain,
    ``annulus`` optionally restricts to ``r_in < |x| < r_out``.
    """

    kind: str
    dim: int
    lower: tuple
    upper: tuple
    params: dict = field(default_factory=dict)
    exclusions: tuple = ()
    annulus: Optional[tuple] = None
    fd_step: Optional[float] = None
    metric_fn: Callable = None
    grad_fn: Optional[Callable] = None
    hess_fn: Optional[Callable] = None
    domain_fn: Optional[Callable] = None
    surface: object = None
    periodic: tuple = ()
    fd_order: int = 4

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    @property
    def step(self) -> float:
        return self.fd_step if self.fd_step is not None else self.diameter * 1e-4

    @property
    def closed_form(self) -> bool:
        return self.grad_fn is not None and self.hess_fn is not None

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.all((x >= np.asarray(self.lower)) & (x <= np.asarray(self.upper)), axis=-1)
        if self.domain_fn is not None:
            ok &= self.domain_fn(x)
        if self.annulus is not None:
            r = np.linalg.norm(x, axis=-1)
            ok &= (r > self.annulus[0]) & (r < self.annulus[1])
        for center, radius in self.exclusions:
            ok &= np.linalg.norm(x - np.asarray(center), axis=-1) > radius
        return ok

    def check(self, x) -> None:
        if not np.all(self.contains(x)):
            raise DomainError(f"point outside the domain of chart {self.kind!r}")

    def metric_at(self, x) -> np.ndarray:
        return self.metric_fn(np.asarray(x, dtype=float))

    def metric_grad_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return self.grad_fn(x)
        return fd_partials(self.metric_fn, x, self.step, self.fd_order)

    def metric_hess_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess_fn is not None:
            return self.hess_fn(x)
        H = fd_partials(self.metric_grad_at, x, self.step, self.fd_order)
        return 0.5 * (H + np.swapaxes(H, x.ndim - 1, x.ndim))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "params": self.params,
            "exclusions": [[list(c), r] for c, r in self.exclusions],
            "annulus": list(self.annulus) if self.annulus else None,
            "fd_step": self.fd_step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricChart":
        kind = d["kind"]
        if kind not in CHART_BUILDERS:
            raise ParameterError(f"unknown chart kind {kind!r}")
        chart = CHART_BUILDERS[kind](**d.get("params", {}))
        excl = tuple((tuple(c), float(r)) for c, r in d.get("exclusions", []))
        ann = tuple(d["annulus"]) if d.get("annulus") else None
        return chart.replace(exclusions=excl or chart.exclusions, annulus=ann or chart.annulus,
                             fd_step=d.get("fd_step", chart.fd_step),
                             lower=tuple(d.get("lower", chart.lower)),
                             upper=tuple(d.get("upper", chart.upper)))

    def replace(self, **kw) -> "MetricChart":
        import dataclasses

        return dataclasses.replace(self, **kw)


def euclidean_chart(dim: int = 2, lower=None, upper=None) -> MetricChart:
    lower = tuple(lower) if lower is not None else (-1.0,) * dim
    upper = tuple(upper) if upper is not None else (1.0,) * dim

    def metric(x):
        return np.broadcast_to(np.eye(dim), np.shape(x)[:-1] + (dim, dim)).copy()

    return MetricChart(
        kind="euclidean", dim=dim, lower=lower, upper=upper,
        params={"dim": dim, "lower": list(lower), "upper": list(upper)},
        metric_fn=metric,
        grad_fn=lambda x: np.zeros(np.shape(x)[:-1] + (dim,) * 3),
        hess_fn=lambda x: np.zeros(np.shape(x)[:-1] + (dim,) * 4),
    )


def klein_chart(dim: int = 2, radius: float = 0.95) -> MetricChart:
    """Klein model on the box [-radius, radius]^dim, restricted to the open unit ball."""
    return MetricChart(
        kind="klein", dim=dim, lower=(-radius,) * dim, upper=(radius,) * dim,
        params={"dim": dim, "radius": radius},
        metric_fn=klein_metric, grad_fn=_klein_grad, hess_fn=_klein_hess,
        domain_fn=lambda x: np.sum(x * x, axis=-1) < 1.0,
    )


def klein_polar_chart(r_max: float = 0.99) -> MetricChart:
    """Two-dimensional Klein model in polar coordinates (r, t)."""
    if not 0 < r_max < 1:
        raise DomainError("polar Klein chart needs 0 < r_max < 1")

    def metric(x):
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 / (1.0 - r * r) ** 2
        out[..., 1, 1] = r * r / (1.0 - r * r)
        return out

    def grad(x):
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 0, 0, 0] = 4 * r / (1 - r * r) ** 3
        out[..., 0, 1, 1] = 2 * r / (1 - r * r) ** 2
        return out

    def hess(x):
        r = x[..., 0]
        q = 1 - r * r
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 0, 0, 0] = 4 / q**3 + 24 * r * r / q**4
        out[..., 0, 0, 1, 1] = 2 / q**2 + 8 * r * r / q**3
        return out

    return MetricChart(
        kind="klein_polar", dim=2, lower=(0.0, 0.0), upper=(r_max, 2 * math.pi),
        params={"r_max": r_max}, metric_fn=metric, grad_fn=grad, hess_fn=hess,
        domain_fn=lambda x: x[..., 0] < 1.0, periodic=(1,),
    )


def poincare_halfspace_chart(dim: int = 2, lower=None, upper=None) -> MetricChart:
    lower = tuple(lower) if lower is not None else (-1.0,) * (dim - 1) + (0.5,)
    upper = tuple(upper) if upper is not None else (1.0,) * (dim - 1) + (2.0,)
    return MetricChart(
        kind="poincare_halfspace", dim=dim, lower=lower, upper=upper,
        params={"dim": dim, "lower": list(lower), "upper": list(upper)},
        metric_fn=_halfspace_metric, grad_fn=_halfspace_grad, hess_fn=_halfspace_hess,
        domain_fn=lambda x: x[..., -1] > 0,
    )


def warped_chart(warp: str = "sinh", r_range=(0.5, 2.0), t_range=(0.0, 2 * math.pi)) -> MetricChart:
    """Rotationally symmetric surface dr^2 + phi(r)^2 dt^2 in coordinates (r, t)."""
    if warp not in WARPINGS:
        raise ParameterError(f"unknown warping {warp!r}")
    phi, dphi, ddphi = WARPINGS[warp]

    def metric(x):
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = phi(r) ** 2
        return out

    def grad(x):
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = 2 * phi(r) * dphi(r)
        return out

    def hess(x):
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 0, 1, 1] = 2 * dphi(r) ** 2 + 2 * phi(r) * ddphi(r)
        return out

    return MetricChart(
        kind="warped", dim=2, lower=(float(r_range[0]), float(t_range[0])),
        upper=(float(r_range[1]), float(t_range[1])),
        params={"warp": warp, "r_range": list(r_range), "t_range": list(t_range)},
        metric_fn=metric, grad_fn=grad, hess_fn=hess,
        domain_fn=lambda x: phi(x[..., 0]) > 0,
    )


def sphere_chart(theta_range=(0.6, 2.5), phi_range=(0.0, 2.0)) -> MetricChart:
    """Round unit sphere in polar coordinates (theta, phi) away from the poles."""
    chart = warped_chart("sin", theta_range, phi_range)
    return chart.replace(kind="sphere", params={"theta_range": list(theta_range),
                                                "phi_range": list(phi_range)})


# ---------------------------------------------------------------------------
# ambient models and hypersurfaces


@dataclass(frozen=True)
class AmbientModel:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "klein_ball", "poincare_halfspace"):
            raise ParameterError(f"unknown ambient model {self.kind!r}")

    def chart(self) -> MetricChart:
        if self.kind == "euclidean":
            return euclidean_chart(self.dim, (-10.0,) * self.dim, (10.0,) * self.dim)
        if self.kind == "klein_ball":
            return klein_chart(self.dim, radius=1.0)
        return poincare_halfspace_chart(self.dim, (-10.0,) * (self.dim - 1) + (1e-9,),
                                        (10.0,) * self.dim)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "klein_ball":
            return np.sum(y * y, axis=-1) < 1.0
        if self.kind == "poincare_halfspace":
            return y[..., -1] > 0
        return np.ones(y.shape[:-1], dtype=bool)


@dataclass(frozen=True)
class AffineProfile:
    """Height z = a.x + c; used as a flat reference graph."""

    slope: tuple
    offset: float = 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ np.asarray(self.slope) + self.offset

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.slope, float), x.shape).copy()

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return np.zeros(x.shape[:-1] + (n, n))

    def smooth(self, x):
        return np.ones(np.shape(x)[:-1], dtype=bool)


@dataclass(frozen=True, eq=False)
class GraphHypersurface:
    """Graph x -> (x, side * profile(x)) inside an ambient model of dimension n + 1."""

    ambient: AmbientModel
    profile: object
    side: int = 1

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ParameterError("side must be +1 or -1")

    @property
    def dim(self) -> int:
        return self.ambient.dim - 1

    def embed(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = self.side * self.profile.value(x)
        return np.concatenate([x, z[..., None]], axis=-1)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        top = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n))
        bottom = self.side * self.profile.gradient(x)[..., None, :]
        return np.concatenate([top, bottom], axis=-2)

    def check(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if not np.all(self.profile.smooth(x)):
            raise DomainError("point outside the smooth locus of the profile")
        if not np.all(self.ambient.contains(self.embed(x))):
            raise DomainError("graph point leaves the ambient domain")


def induced_metric(surface: GraphHypersurface, x) -> np.ndarray:
    """Pullback of the ambient metric under the graph map."""
    x = np.asarray(x, dtype=float)
    surface.check(x)
    J = surface.jacobian(x)
    G = surface.ambient.chart().metric_at(surface.embed(x))
    return np.einsum("...ai,...ab,...bj->...ij", J, G, J)


def graph_chart(surface: GraphHypersurface, lower, upper, exclusions=(), annulus=None,
                fd_step=None, params=None, fd_order: int = 6) -> MetricChart:
    """Chart on the base domain carrying the induced metric; derivatives by finite differences."""

    amb = surface.ambient.chart()

    def metric(x):
        J = surface.jacobian(x)
        G = amb.metric_at(surface.embed(x))
        return np.einsum("...ai,...ab,...bj->...ij", J, G, J)

    def grad(x):
        # chain rule; only the last row of the Jacobian varies, by the profile Hessian
        n = x.shape[-1]
        F = surface.embed(x)
        J = surface.jacobian(x)
        G = amb.metric_at(F)
        dG = np.einsum("...cab,...ck->...kab", amb.metric_grad_at(F), J)
        dJ = np.zeros(x.shape[:-1] + (n, n + 1, n))
        dJ[..., :, n, :] = surface.side * surface.profile.hessian(x)
        t = np.einsum("...kai,...ab,...bj->...kij", dJ, G, J)
        return t + np.swapaxes(t, -1, -2) + np.einsum("...ai,...kab,...bj->...kij", J, dG, J)

    return MetricChart(
        kind="graph", dim=surface.dim, lower=tuple(lower), upper=tuple(upper),
        params=params or {}, exclusions=tuple(exclusions), annulus=annulus, fd_step=fd_step,
        metric_fn=metric, grad_fn=grad, domain_fn=lambda x: surface.profile.smooth(x),
        surface=surface, fd_order=fd_order,
    )


def pullback_chart(kind: str, ambient: AmbientModel, embed: Callable, jacobian: Callable,
                   lower, upper, params=None, fd_step=None, periodic=()) -> MetricChart:
    def metric(x):
        J = jacobian(x)
        G = ambient.chart().metric_at(embed(x))
        return np.einsum("...ai,...ab,...bj->...ij", J, G, J)

    return MetricChart(kind=kind, dim=len(lower), lower=tuple(lower), upper=tuple(upper),
                       params=params or {}, metric_fn=metric, fd_step=fd_step, periodic=periodic)


def cone_K_chart() -> MetricChart:
    """Upper cone of K in coordinates (u, t) with z = 1 - u^2, |x| = u^2 / sqrt(3).

    The substitution u = sqrt(1 - z) makes the area density bounded at the
    ideal apex u = 0, so midpoint quadrature converges.
    """
    ambient = AmbientModel("klein_ball", 3)

    def embed(x):
        u, t = x[..., 0], x[..., 1]
        rho = u * u / SQRT3
        return np.stack([rho * np.cos(t), rho * np.sin(t), 1.0 - u * u], axis=-1)

    def jac(x):
        u, t = x[..., 0], x[..., 1]
        rho = u * u / SQRT3
        out = np.zeros(x.shape[:-1] + (3, 2))
        out[..., 0, 0] = 2 * u / SQRT3 * np.cos(t)
        out[..., 1, 0] = 2 * u / SQRT3 * np.sin(t)
        out[..., 2, 0] = -2 * u
        out[..., 0, 1] = -rho * np.sin(t)
        out[..., 1, 1] = rho * np.cos(t)
        return out

    return pullback_chart("cone_K", ambient, embed, jac, (0.0, 0.0), (1.0, 2 * math.pi),
                          periodic=(1,))


CHART_BUILDERS: dict[str, Callable[..., MetricChart]] = {
    "euclidean": euclidean_chart,
    "klein": klein_chart,
    "klein_polar": klein_polar_chart,
    "poincare_halfspace": poincare_halfspace_chart,
    "warped": warped_chart,
    "sphere": sphere_chart,
    "cone_K": lambda: cone_K_chart(),
}


def _graph_builder(**params) -> MetricChart:
    from .spikes import SpikeProfile

    profile = SpikeProfile.from_dict(params["profile"])
    surface = GraphHypersurface(AmbientModel("klein_ball", profile.dim + 1), profile,
                                params.get("side", 1))
    return graph_chart(surface, params["lower"], params["upper"], params=params)


CHART_BUILDERS["graph"] = _graph_builder


# ---------------------------------------------------------------------------
# connection and curvature


def _inv(g: np.ndarray) -> np.ndarray:
    return np.linalg.inv(g)


def christoffel(chart: MetricChart, x, check: bool = True) -> np.ndarray:
    """Gamma[..., k, i, j] = Gamma^k_ij."""
    x = np.asarray(x, dtype=float)
    if check:
        chart.check(x)
    g = chart.metric_at(x)
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise NumericalError(f"singular metric, condition number {np.max(cond):.3e}")
    return _christoffel_from(g, chart.metric_grad_at(x))


def _christoffel_from(g, dg):
    ginv = _inv(g)
    # first kind: Gamma_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (np.swapaxes(dg, -3, -2).swapaxes(-3, -1)  # d_i g_jl -> [l, i, j]
                   + np.swapaxes(dg, -3, -1)                   # d_j g_il -> [l, i, j]
                   - dg)
    return np.einsum("...kl,...lij->...kij", ginv, first)


def riemann(chart: MetricChart, x, check: bool = True) -> np.ndarray:
    """Fully covariant Riemann tensor R[..., i, j, k, l] = R_ijkl."""
    x = np.asarray(x, dtype=float)
    if check:
        chart.check(x)
    g = chart.metric_at(x)
    dg = chart.metric_grad_at(x)
    ddg = chart.metric_hess_at(x)
    if not (np.all(np.isfinite(dg)) and np.all(np.isfinite(ddg))):
        raise NumericalError("non-finite metric derivatives")
    return riemann_from_metric(g, dg, ddg)


def riemann_from_metric(g, dg, ddg) -> np.ndarray:
    ginv = _inv(g)
    first = 0.5 * (np.swapaxes(dg, -3, -2).swapaxes(-3, -1) + np.swapaxes(dg, -3, -1) - dg)
    gam = np.einsum("...kl,...lij->...kij", ginv, first)
    # d_m Gamma_lij from second derivatives: layout ddg[m, a, i, j] = d_m d_a g_ij
    d_first = 0.5 * (np.einsum("...mijl->...mlij", ddg)      # d_m d_i g_jl
                     + np.einsum("...mjil->...mlij", ddg)    # d_m d_j g_il
                     - np.einsum("...mlij->...mlij", ddg))   # d_m d_l g_ij
    d_ginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    d_gam = (np.einsum("...mkl,...lij->...mkij", d_ginv, first)
             + np.einsum("...kl,...mlij->...mkij", ginv, d_first))
    # R^l_ijk = d_i Gam^l_jk - d_j Gam^l_ik + Gam^l_im Gam^m_jk - Gam^l_jm Gam^m_ik
    R_up = (np.einsum("...iljk->...lijk", d_gam) - np.einsum("...jlik->...lijk", d_gam)
            + np.einsum("...lim,...mjk->...lijk", gam, gam)
            - np.einsum("...ljm,...mik->...lijk", gam, gam))
    return np.einsum("...lm,...mijk->...ijkl", g, R_up)


def ricci_from_riemann(Rm, g) -> np.ndarray:
    """Ric_jk = g^il R_ijkl (trace over the first and last slots)."""
    return np.einsum("...il,...ijkl->...jk", _inv(g), Rm)


def sectional(Rm, g, X, Y) -> np.ndarray:
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", Rm, X, Y, Y, X)
    gxx = np.einsum("...ij,...i,...j->...", g, X, X)
    gyy = np.einsum("...ij,...i,...j->...", g, Y, Y)
    gxy = np.einsum("...ij,...i,...j->...", g, X, Y)
    return num / (gxx * gyy - gxy**2)


def sample_planes(dim: int, n_random: int = 20, rng=0) -> list:
    """All coordinate planes plus ``n_random`` random planes."""
    rng = np.random.default_rng(rng)
    eye = np.eye(dim)
    planes = [(eye[i], eye[j]) for i in range(dim) for j in range(i + 1, dim)]
    if dim > 2:
        for _ in range(n_random):
            X, Y = rng.normal(size=(2, dim))
            planes.append((X, Y))
    return planes


def second_fundamental_form(surface: GraphHypersurface, x) -> np.ndarray:
    """II_ij = <nabla_{F_i} F_j, nu> with nu the unit normal in the ambient metric."""
    x = np.asarray(x, dtype=float)
    n = surface.dim
    F = surface.embed(x)
    J = surface.jacobian(x)
    amb = surface.ambient.chart()
    gam = _christoffel_from(amb.metric_at(F), amb.metric_grad_at(F))
    N = np.concatenate([-surface.side * surface.profile.gradient(x),
                        np.ones(x.shape[:-1] + (1,))], axis=-1)
    Ginv = _inv(amb.metric_at(F))
    norm = np.sqrt(np.einsum("...a,...ab,...b->...", N, Ginv, N))
    acc = np.zeros(x.shape[:-1] + (n + 1, n, n))
    acc[..., n, :, :] = surface.side * surface.profile.hessian(x)
    acc = acc + np.einsum("...cab,...ai,...bj->...cij", gam, J, J)
    return np.einsum("...c,...cij->...ij", N, acc) / norm[..., None, None]


def gauss_sectional(surface: GraphHypersurface, x, X, Y) -> np.ndarray:
    """Sectional curvature predicted by the Gauss equation."""
    x = np.asarray(x, dtype=float)
    F = surface.embed(x)
    J = surface.jacobian(x)
    amb = surface.ambient.chart()
    Rm_amb = riemann(amb, F, check=False)
    G = amb.metric_at(F)
    JX = np.einsum("...ai,...i->...a", J, X)
    JY = np.einsum("...ai,...i->...a", J, Y)
    K_amb = sectional(Rm_amb, G, JX, JY)
    II = second_fundamental_form(surface, x)
    g = np.einsum("...ai,...ab,...bj->...ij", J, G, J)
    num = (np.einsum("...ij,...i,...j->...", II, X, X) * np.einsum("...ij,...i,...j->...", II, Y, Y)
           - np.einsum("...ij,...i,...j->...", II, X, Y) ** 2)
    gxx = np.einsum("...ij,...i,...j->...", g, X, X)
    gyy = np.einsum("...ij,...i,...j->...", g, Y, Y)
    gxy = np.einsum("...ij,...i,...j->...", g, X, Y)
    return K_amb + num / (gxx * gyy - gxy**2)


@dataclass
class CurvatureReport:
    point: tuple
    sectional_min: float
    ricci_eigen_min: float
    gauss_equation_residual: float = float("nan")
    tolerance: float = 1e-3
    sectional_values: list = field(default_factory=list)

    @property
    def gauss_ok(self) -> bool:
        r = self.gauss_equation_residual
        return not np.isfinite(r) or r <= self.tolerance


def curvature(chart: MetricChart, x, n_random: int = 20, rng=0, tolerance: float = 1e-3,
              full: bool = False):
    """Curvature summary at a point; with ``full=True`` also return (Riemann, Ricci)."""
    x = np.asarray(x, dtype=float)
    chart.check(x)
    g = chart.metric_at(x)
    Rm = riemann(chart, x, check=False)
    if not np.all(np.isfinite(Rm)):
        raise NumericalError("non-finite curvature")
    ric = ricci_from_riemann(Rm, g)
    planes = sample_planes(chart.dim, n_random, rng)
    secs = [float(sectional(Rm, g, X, Y)) for X, Y in planes]
    ric_eig = np.linalg.eigvals(np.linalg.solve(g, ric)).real
    resid = float("nan")
    if chart.surface is not None:
        gs = [float(gauss_sectional(chart.surface, x, X, Y)) for X, Y in planes]
        resid = max(abs(a - b) for a, b in zip(secs, gs))
    rep = CurvatureReport(tuple(float(v) for v in x), min(secs), float(ric_eig.min()), resid,
                          tolerance, secs)
    if full:
        return rep, Rm, ric
    return rep


def symmetry_residuals(Rm: np.ndarray) -> dict:
    """Max violations of the algebraic symmetries and the first Bianchi identity."""
    return {
        "antisym_12": float(np.max(np.abs(Rm + np.swapaxes(Rm, -4, -3)))),
        "antisym_34": float(np.max(np.abs(Rm + np.swapaxes(Rm, -2, -1)))),
        "pair": float(np.max(np.abs(Rm - np.einsum("...ijkl->...klij", Rm)))),
        "bianchi": float(np.max(np.abs(Rm + np.einsum("...ijkl->...jkil", Rm)
                                       + np.einsum("...ijkl->...kijl", Rm)))),
    }


def write_curvature_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        dim = len(reports[0].point) if reports else 0
        w.writerow([f"x{i}" for i in range(dim)] + ["sec_min", "ric_min", "gauss_residual"])
        for r in reports:
            w.writerow([f"{v:.12g}" for v in r.point]
                       + [f"{r.sectional_min:.12g}", f"{r.ricci_eigen_min:.12g}",
                          f"{r.gauss_equation_residual:.12g}"])


# ---------------------------------------------------------------------------
# volume


def _midpoint_sum(chart: MetricChart, lo, hi, cells: int) -> float:
    axes = [lo[k] + (np.arange(cells) + 0.5) * (hi[k] - lo[k]) / cells for k in range(len(lo))]
    cell = float(np.prod([(hi[k] - lo[k]) / cells for k in range(len(lo))]))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, len(lo))
    total = 0.0
    for chunk in np.array_split(pts, max(1, len(pts) // 200_000)):
        dens = np.sqrt(np.linalg.det(chart.metric_at(chunk)))
        if not np.all(np.isfinite(dens)):
            raise DomainError("volume density is not finite on the region")
        total += float(np.sum(dens))
    return total * cell


def volume(chart: MetricChart, region=None, rtol: float = 1e-4, start: int = 8,
           max_cells: Optional[int] = None, info: bool = False):
    """Riemannian volume of a coordinate sub-box by midpoint rule with Richardson refinement."""
    lo, hi = (chart.lower, chart.upper) if region is None else region
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    if np.any(lo < np.asarray(chart.lower) - 1e-12) or np.any(hi > np.asarray(chart.upper) + 1e-12):
        raise DomainError("region leaves the chart box")
    if np.any(hi < lo):
        raise ParameterError("region bounds are reversed")
    if np.any(hi == lo):
        return (0.0, {"levels": 0}) if info else 0.0
    if max_cells is None:
        max_cells = {1: 1 << 20, 2: 2048, 3: 128}.get(chart.dim, 32)
    cells = start
    prev_mid = _midpoint_sum(chart, lo, hi, cells)
    prev_rich = None
    history = []
    while True:
        cells *= 2
        mid = _midpoint_sum(chart, lo, hi, cells)
        rich = (4.0 * mid - prev_mid) / 3.0
        history.append((cells, mid, rich))
        if prev_rich is not None and abs(rich - prev_rich) <= rtol * abs(rich):
            break
        if cells >= max_cells:
            break
        prev_mid, prev_rich = mid, rich
    result = max(rich, 0.0)
    if info:
        return result, {"levels": len(history), "cells": cells, "history": history,
                        "converged": prev_rich is not None and abs(rich - prev_rich) <= rtol * abs(rich)}
    return result
