"""Covariant calculus on structured lattices over metric charts.

Tensor data is stored with the lattice axes first and covariant slots last,
``data[i0, ..., i_{n-1}, a_1, ..., a_k]``.  Derivative slots are prepended:
``(nabla T)[..., b, a_1, ..., a_k] = (nabla_b T)_{a_1 ... a_k}``.

Partials use ``np.gradient`` (second order, one-sided at the lattice edge).
A node whose stencil touches an excluded node is flagged and dropped from
norms and inner products.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .geometry import MetricChart, riemann_from_metric, _christoffel_from

LETTERS = "ijklmnopqr"


# ---------------------------------------------------------------------------
# lattice


class Mesh:
    """Node lattice over a sub-box of a chart with cached metric data."""

    def __init__(self, chart: MetricChart, step: Optional[float] = None,
                 lower: Optional[Sequence[float]] = None, upper: Optional[Sequence[float]] = None,
                 shape: Optional[Sequence[int]] = None):
        self.chart = chart
        n = chart.dim
        lower = np.asarray(chart.lower if lower is None else lower, float)
        upper = np.asarray(chart.upper if upper is None else upper, float)
        if shape is None:
            if step is None:
                raise ParameterError("give a step or a shape")
            shape = [int(round((upper[k] - lower[k]) / step)) + 1 for k in range(n)]
            upper = lower + (np.asarray(shape) - 1) * step
        self.shape = tuple(int(s) for s in shape)
        self.lower, self.upper = lower, upper
        self.axes = [np.linspace(lower[k], upper[k], self.shape[k]) for k in range(n)]
        self.h = tuple(float(a[1] - a[0]) for a in self.axes)
        self.points = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        self.mask = ~chart.contains(self.points)
        good = ~self.mask
        eye = np.eye(n)
        self.g = np.broadcast_to(eye, self.shape + (n, n)).copy()
        self.g[good] = chart.metric_at(self.points[good])
        self.dg = np.zeros(self.shape + (n, n, n))
        self.dg[good] = chart.metric_grad_at(self.points[good])
        self.ginv = np.linalg.inv(self.g)
        self.sqrt_det = np.sqrt(np.linalg.det(self.g))
        self.sqrt_det[self.mask] = 0.0
        self.gamma = _christoffel_from(self.g, self.dg)
        self.frame = _gram_schmidt(self.g)

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def step(self) -> float:
        return max(self.h)

    @property
    def cell(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights: half on each lattice face, so constants integrate exactly."""
        w = np.ones(self.shape)
        for ax, n in enumerate(self.shape):
            edge = [slice(None)] * len(self.shape)
            for i in (0, n - 1):
                edge[ax] = i
                w[tuple(edge)] *= 0.5
        return w

    @cached_property
    def riemann(self) -> np.ndarray:
        """Covariant R_ijkl at every node (zero on excluded nodes)."""
        n = self.dim
        out = np.zeros(self.shape + (n,) * 4)
        good = ~self.mask
        ddg = self.chart.metric_hess_at(self.points[good])
        out[good] = riemann_from_metric(self.g[good], self.dg[good], ddg)
        return out

    @cached_property
    def riemann_up(self) -> np.ndarray:
        """R^m_ijk = g^{ml} R_ijkl."""
        return np.einsum("...ml,...ijkl->...mijk", self.ginv, self.riemann)

    @cached_property
    def ricci(self) -> np.ndarray:
        return np.einsum("...il,...ijkl->...jk", self.ginv, self.riemann)

    @cached_property
    def curvature_operator_min(self) -> np.ndarray:
        """Smallest eigenvalue of the curvature operator on 2-vectors at each node."""
        n = self.dim
        E = self.frame
        Rf = np.einsum("...ijkl,...ia,...jb,...kc,...ld->...abcd", self.riemann, E, E, E, E)
        pairs = list(itertools.combinations(range(n), 2))
        M = np.empty(self.shape + (len(pairs), len(pairs)))
        for p, (a, b) in enumerate(pairs):
            for q, (c, d) in enumerate(pairs):
                M[..., p, q] = Rf[..., a, b, d, c]
        return np.linalg.eigvalsh(M)[..., 0]

    def coarsen(self) -> "Mesh":
        """Every other node; step doubles."""
        shape = [(s - 1) // 2 + 1 for s in self.shape]
        upper = self.lower + (np.asarray(shape) - 1) * 2 * np.asarray(self.h)
        return Mesh(self.chart, lower=self.lower, upper=upper, shape=shape)

    def sample(self, fn) -> "DiscreteField":
        vals = np.zeros(self.shape)
        good = ~self.mask
        vals[good] = fn(self.points[good])
        return DiscreteField(self, vals)

    def support_margin_ok(self, values, margin: int = 3, tol: float = 0.0) -> bool:
        """Whether a field vanishes within ``margin`` nodes of the lattice edge."""
        inner = np.zeros(self.shape, bool)
        inner[tuple(slice(margin, -margin) for _ in self.shape)] = True
        v = np.abs(values).reshape(self.shape + (-1,))
        return bool(np.all(v[~inner] <= tol))


def _gram_schmidt(g: np.ndarray) -> np.ndarray:
    """Orthonormal frame E[..., i, a] from the coordinate frame, in coordinate order."""
    n = g.shape[-1]
    E = np.zeros_like(g)
    for a in range(n):
        v = np.zeros(g.shape[:-1])
        v[..., a] = 1.0
        for b in range(a):
            proj = np.einsum("...i,...ij,...j->...", v, g, E[..., :, b])
            v = v - proj[..., None] * E[..., :, b]
        nrm = np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))
        E[..., :, a] = v / nrm[..., None]
    return E


# ---------------------------------------------------------------------------
# fields


@dataclass
class TensorField:
    """General covariant k-tensor field (full component storage)."""

    mesh: Mesh
    data: np.ndarray
    flagged: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros(self.mesh.shape, bool)

    @property
    def degree(self) -> int:
        return self.data.ndim - len(self.mesh.shape)

    @property
    def valid(self) -> np.ndarray:
        return ~(self.mesh.mask | self.flagged)

    def norm_pointwise(self) -> np.ndarray:
        return np.sqrt(np.maximum(inner_pointwise(self.mesh, self.data, self.data), 0.0))

    def full(self) -> "TensorField":
        return self


@dataclass
class DiscreteField(TensorField):
    """Scalar field sampled at the nodes."""

    @property
    def values(self) -> np.ndarray:
        return self.data


def multisets(n: int, k: int) -> list:
    return list(itertools.combinations_with_replacement(range(n), k))


@dataclass
class SymTensorField:
    """Totally symmetric covariant k-tensor stored by multiset index."""

    mesh: Mesh
    degree: int
    components: np.ndarray
    flagged: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros(self.mesh.shape, bool)
        m = len(multisets(self.mesh.dim, self.degree))
        if self.components.shape != self.mesh.shape + (m,):
            raise ParameterError(f"expected {m} packed components per node")

    @property
    def index(self) -> list:
        return multisets(self.mesh.dim, self.degree)

    @property
    def data(self) -> np.ndarray:
        return self.full().data

    @property
    def valid(self) -> np.ndarray:
        return ~(self.mesh.mask | self.flagged)

    def full(self) -> TensorField:
        n, k = self.mesh.dim, self.degree
        out = np.zeros(self.mesh.shape + (n,) * k)
        for c, ms in enumerate(self.index):
            for perm in set(itertools.permutations(ms)):
                out[(...,) + perm] = self.components[..., c]
        return TensorField(self.mesh, out, self.flagged.copy())

    @classmethod
    def from_full(cls, field: TensorField) -> "SymTensorField":
        """Pack a symmetric tensor (reads the sorted-index component)."""
        k = field.degree
        comps = np.stack([field.data[(...,) + ms] for ms in multisets(field.mesh.dim, k)], axis=-1)
        return cls(field.mesh, k, comps, field.flagged.copy())

    def norm_pointwise(self) -> np.ndarray:
        return self.full().norm_pointwise()


def as_full(f) -> TensorField:
    return f.full() if isinstance(f, SymTensorField) else f


def tensor_field(mesh: Mesh, fn, degree: int) -> TensorField:
    n = mesh.dim
    data = np.zeros(mesh.shape + (n,) * degree)
    good = ~mesh.mask
    data[good] = fn(mesh.points[good])
    return TensorField(mesh, data)


# ---------------------------------------------------------------------------
# pointwise algebra


def raise_all(mesh: Mesh, data: np.ndarray) -> np.ndarray:
    k = data.ndim - len(mesh.shape)
    out = data
    for i in range(k):
        idx = LETTERS[:k]
        src = idx[:i] + "z" + idx[i + 1:]
        out = np.einsum(f"...{idx[i]}z,...{src}->...{idx}", mesh.ginv, out)
    return out


def inner_pointwise(mesh: Mesh, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = a.ndim - len(mesh.shape)
    up = raise_all(mesh, a)
    return np.sum((up * b).reshape(mesh.shape + (-1,)), axis=-1) if k else a * b


def _dilate(flag: np.ndarray, steps: int = 1) -> np.ndarray:
    out = flag.copy()
    for _ in range(steps):
        cur = out.copy()
        for ax in range(flag.ndim):
            lo = [slice(None)] * flag.ndim
            hi = [slice(None)] * flag.ndim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            cur[tuple(lo)] |= out[tuple(hi)]
            cur[tuple(hi)] |= out[tuple(lo)]
        out = cur
    return out


def partials(mesh: Mesh, data: np.ndarray) -> np.ndarray:
    """Coordinate partials with the derivative slot first among tensor slots."""
    G = len(mesh.shape)
    parts = [np.gradient(data, mesh.h[ax], axis=ax, edge_order=2) for ax in range(G)]
    return np.stack(parts, axis=G)


def covariant_derivative(field) -> TensorField:
    """nabla T for a scalar, general or symmetric tensor field."""
    f = as_full(field)
    mesh = f.mesh
    k = f.degree
    data = np.where(mesh.mask.reshape(mesh.shape + (1,) * k), 0.0, f.data)
    out = partials(mesh, data)
    idx = LETTERS[:k]
    for i in range(k):
        src = idx[:i] + "z" + idx[i + 1:]
        out = out - np.einsum(f"...zy{idx[i]},...{src}->...y{idx}", mesh.gamma, data)
    flagged = _dilate(f.flagged | mesh.mask) & ~mesh.mask
    return TensorField(mesh, out, flagged)


def nabla_power(field, j: int) -> TensorField:
    f = as_full(field)
    for _ in range(j):
        f = covariant_derivative(f)
    return f


def trace12(mesh: Mesh, data: np.ndarray) -> np.ndarray:
    """g^{bc} T[b, c, ...]."""
    rest = LETTERS[:data.ndim - len(mesh.shape) - 2]
    return np.einsum(f"...bc,...bc{rest}->...{rest}", mesh.ginv, data)


def gradient(u: DiscreteField) -> TensorField:
    return covariant_derivative(u)


def hessian(u: DiscreteField) -> TensorField:
    return nabla_power(u, 2)


def laplacian(u) -> DiscreteField:
    """Scalar Laplacian tr nabla^2 u (nonpositive spectrum)."""
    H = hessian(u)
    return DiscreteField(H.mesh, trace12(H.mesh, H.data), H.flagged)


# ---------------------------------------------------------------------------
# norms


@dataclass
class NormReport:
    p: float
    seminorms: list
    total: float
    step: float
    refinement_estimate: float = float("nan")
    flagged: int = 0

    def rows(self) -> list:
        return [{"p": self.p, "order": j, "seminorm": s, "step": self.step}
                for j, s in enumerate(self.seminorms)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["p", "order", "seminorm", "step"])
            w.writeheader()
            for r in self.rows():
                w.writerow(r)


def integrate(mesh: Mesh, values: np.ndarray, valid: Optional[np.ndarray] = None) -> float:
    if valid is None:
        valid = ~mesh.mask
    w = np.where(valid, values * mesh.sqrt_det * mesh.weights, 0.0)
    return float(np.sum(w) * mesh.cell)


def lp_norm(field, p: float, region: Optional[np.ndarray] = None) -> float:
    if p < 1:
        raise ParameterError("p must be at least 1")
    f = as_full(field)
    mag = np.abs(f.data) if f.degree == 0 else f.norm_pointwise()
    valid = ~(f.mesh.mask | f.flagged)
    if region is not None:
        valid &= region
    if math.isinf(p):
        return float(np.max(np.where(valid, mag, 0.0)))
    return integrate(f.mesh, mag**p, valid) ** (1.0 / p)


def inner_product(a, b, region: Optional[np.ndarray] = None) -> float:
    fa, fb = as_full(a), as_full(b)
    valid = ~(fa.mesh.mask | fa.flagged | fb.flagged)
    if region is not None:
        valid &= region
    return integrate(fa.mesh, inner_pointwise(fa.mesh, fa.data, fb.data), valid)


def _seminorms(field, k, p):
    f = as_full(field)
    out = [lp_norm(f, p)]
    for _ in range(k):
        f = covariant_derivative(f)
        out.append(lp_norm(f, p))
    return out, int(np.sum(f.flagged))


def sobolev_norm(field: DiscreteField, k: int, p: float, estimate: bool = True) -> NormReport:
    """W^{k,p} norm as the sum of the L^p norms of nabla^j u, j = 0..k."""
    if p < 1:
        raise ParameterError("p must be at least 1")
    semis, nflag = _seminorms(field, k, p)
    total = float(sum(semis))
    est = float("nan")
    if estimate and min(field.mesh.shape) >= 9:
        coarse = field.mesh.coarsen()
        sl = tuple(slice(0, 2 * s - 1, 2) for s in coarse.shape)
        cf = DiscreteField(coarse, field.data[sl])
        est = abs(total - sum(_seminorms(cf, k, p)[0])) / 3.0
    return NormReport(p, semis, total, field.mesh.step, est, nflag)


# ---------------------------------------------------------------------------
# symmetric tensors


def symmetrize(field) -> SymTensorField:
    f = as_full(field)
    k = f.degree
    G = len(f.mesh.shape)
    acc = np.zeros_like(f.data)
    perms = list(itertools.permutations(range(k)))
    for perm in perms:
        acc += np.transpose(f.data, tuple(range(G)) + tuple(G + q for q in perm))
    return SymTensorField.from_full(TensorField(f.mesh, acc / len(perms), f.flagged.copy()))


def _sym_scalar(mesh, values, flagged) -> SymTensorField:
    return SymTensorField(mesh, 0, values[..., None], flagged)


def D_S(h) -> SymTensorField:
    """D_S h = k s_k(nabla h) for h of degree k - 1."""
    f = as_full(h)
    k = f.degree + 1
    S = symmetrize(covariant_derivative(f))
    return SymTensorField(S.mesh, k, k * S.components, S.flagged)


def D_S_star(T: SymTensorField) -> SymTensorField:
    """-sum_a (nabla_{E_a} T)(E_a, ...) in the cached orthonormal frame."""
    if T.degree < 1:
        raise ParameterError("D_S^* needs degree at least 1")
    mesh = T.mesh
    dT = covariant_derivative(T)
    E = mesh.frame
    proj = np.einsum("...ba,...ca->...bc", E, E)
    rest = LETTERS[:T.degree - 1]
    out = -np.einsum(f"...bc,...bc{rest}->...{rest}", proj, dT.data)
    full = TensorField(mesh, out, dT.flagged)
    if T.degree == 1:
        return _sym_scalar(mesh, out, dT.flagged)
    return SymTensorField.from_full(full)


def bochner_laplacian(T) -> SymTensorField:
    """Delta_B T = -tr_12 nabla^2 T."""
    f = as_full(T)
    H = nabla_power(f, 2)
    k = f.degree
    rest = LETTERS[:k]
    out = -np.einsum(f"...bc,...bc{rest}->...{rest}", H.mesh.ginv, H.data)
    if k == 0:
        return _sym_scalar(f.mesh, out, H.flagged)
    return SymTensorField.from_full(TensorField(f.mesh, out, H.flagged))


def sampson_laplacian(T: SymTensorField) -> SymTensorField:
    """Delta_Sym = D_S^* D_S - D_S D_S^*."""
    a = D_S_star(D_S(T))
    b = D_S(D_S_star(T))
    return SymTensorField(T.mesh, T.degree, a.components - b.components, a.flagged | b.flagged)


def weitzenbock_action(T) -> SymTensorField:
    """ric(T)(X_1..X_k) = sum_i sum_j (R(E_j, X_i) T)(X_1, .., E_j, .., X_k)."""
    f = as_full(T)
    mesh = f.mesh
    k = f.degree
    Rup = mesh.riemann_up  # R^d_{jab} = Rup[..., d, j, a, b]
    Rc = np.einsum("...jl,...djal->...da", mesh.ginv, Rup)
    S = np.einsum("...jl,...djab->...ldab", mesh.ginv, Rup)
    idx = LETTERS[:k]
    out = np.zeros_like(f.data)
    for i in range(k):
        src = idx[:i] + "z" + idx[i + 1:]
        out -= np.einsum(f"...z{idx[i]},...{src}->...{idx}", Rc, f.data)
        for m in range(k):
            if m == i:
                continue
            src2 = list(idx)
            src2[i], src2[m] = "y", "z"
            out -= np.einsum(f"...yz{idx[i]}{idx[m]},...{''.join(src2)}->...{idx}", S, f.data)
    full = TensorField(mesh, out, f.flagged.copy())
    if isinstance(T, SymTensorField) or k <= 1:
        if k == 0:
            return _sym_scalar(mesh, out, f.flagged.copy())
        return SymTensorField.from_full(full)
    return full


def weitzenbock_constant(k: int, n: int) -> float:
    """C_k with <ric(T), T> >= alpha C_k |T|^2 when the curvature operator is >= alpha <= 0.

    In curvature one, <ric(T), T> = k(n+k-2)|T|^2 - k(k-1)|tr T|^2 for symmetric T,
    and the general estimate is alpha times that quadratic form.
    """
    return float(k * (n + k - 2))


# ---------------------------------------------------------------------------
# radial calculus on two-dimensional models


class RadialMesh:
    """Rotationally invariant tensors on dr^2 + phi(r)^2 dtheta^2 in the frame (e_r, e_theta).

    The only nonzero connection coefficients are
    nabla_{e_theta} e_r = kappa e_theta and nabla_{e_theta} e_theta = -kappa e_r,
    kappa = phi'/phi.  The grid may be nonuniform.
    """

    def __init__(self, r: np.ndarray, model):
        self.r = np.asarray(r, dtype=float)
        if np.any(np.diff(self.r) <= 0):
            raise ParameterError("radial grid must be strictly increasing")
        self.model = model
        self.kappa = np.asarray(model.kappa(self.r), float)
        n = getattr(model, "n", 2)
        self.n = n
        w = np.zeros((len(self.r), 2, 2, 2))
        w[:, 1, 0, 1] = self.kappa   # nabla_{e_theta} e_r = kappa e_theta
        w[:, 1, 1, 0] = -self.kappa  # nabla_{e_theta} e_theta = -kappa e_r
        self.w = w

    def d(self, f: np.ndarray) -> np.ndarray:
        return np.gradient(f, self.r, axis=0, edge_order=2)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.d(self.d(f)) + (self.n - 1) * self.kappa * self.d(f)

    def covariant(self, T: np.ndarray) -> np.ndarray:
        """(nabla T)[b, a...] = delta_{b r} T'[a...] - sum_i w[b, a_i, c] T[.., c, ..]."""
        if self.n != 2:
            raise ParameterError("frame calculus is implemented for surfaces")
        k = T.ndim - 1
        out = np.zeros((len(self.r), 2) + T.shape[1:])
        out[:, 0] = self.d(T)
        idx = LETTERS[:k]
        for i in range(k):
            src = idx[:i] + "z" + idx[i + 1:]
            out -= np.einsum(f"...y{idx[i]}z,...{src}->...y{idx}", self.w, T)
        return out

    def nabla_power(self, f: np.ndarray, j: int) -> list:
        out = [np.asarray(f, float)]
        for _ in range(j):
            out.append(self.covariant(out[-1]))
        return out

    @staticmethod
    def magnitude(T: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum(T.reshape(len(T), -1) ** 2, axis=1))

    def integral(self, values: np.ndarray) -> float:
        """int values dvol for nonnegative values, combining logs to avoid overflow."""
        from .geometry import sphere_area

        values = np.asarray(values, float)
        with np.errstate(divide="ignore"):
            logv = np.log(values) + (self.n - 1) * self.model.log_phi(self.r)
        dens = np.exp(logv)
        return float(sphere_area(self.n) * np.trapezoid(dens, self.r))

    def integral_signed(self, values: np.ndarray) -> float:
        values = np.asarray(values, float)
        return self.integral(np.maximum(values, 0.0)) - self.integral(np.maximum(-values, 0.0))

    def lp_norm(self, T: np.ndarray, p: float) -> float:
        return self.integral(self.magnitude(T) ** p) ** (1.0 / p)


# ---------------------------------------------------------------------------
# I/O


def write_field_csv(field, path) -> None:
    f = as_full(field)
    mesh = f.mesh
    n = mesh.dim
    flat = f.data.reshape(mesh.shape + (-1,))
    ncomp = flat.shape[-1]
    comp_names = ["value"] if f.degree == 0 else [
        "T" + "".join(map(str, ix)) for ix in itertools.product(range(n), repeat=f.degree)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(n)] + comp_names + ["masked"])
        for ix in np.ndindex(mesh.shape):
            w.writerow([f"{v:.12g}" for v in mesh.points[ix]]
                       + [f"{flat[ix][c]:.15g}" for c in range(ncomp)]
                       + [int(mesh.mask[ix] or f.flagged[ix])])


def read_field_csv(mesh: Mesh, path) -> TensorField:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    names = rows.dtype.names
    comp = [c for c in names if c == "value" or c.startswith("T")]
    data = np.stack([rows[c] for c in comp], axis=-1).reshape(mesh.shape + (len(comp),))
    k = 0 if comp == ["value"] else len(comp[0]) - 1
    data = data[..., 0] if k == 0 else data.reshape(mesh.shape + (mesh.dim,) * k)
    cls = DiscreteField if k == 0 else TensorField
    return cls(mesh, data, rows["masked"].reshape(mesh.shape).astype(bool) & ~mesh.mask)


def save_field(field, path) -> None:
    """Binary grid: header (dims, steps, lower, mask) and component array."""
    f = as_full(field)
    m = f.mesh
    np.savez_compressed(path, shape=np.asarray(m.shape), steps=np.asarray(m.h),
                        lower=m.lower, mask=m.mask | f.flagged, data=f.data,
                        chart=np.asarray(m.chart.kind))


def load_field(path, mesh: Mesh) -> TensorField:
    z = np.load(path)
    if tuple(z["shape"]) != mesh.shape or not np.allclose(z["steps"], mesh.h):
        raise DomainError("stored grid does not match the mesh")
    data = z["data"]
    cls = DiscreteField if data.ndim == len(mesh.shape) else TensorField
    return cls(mesh, data, z["mask"] & ~mesh.mask)
