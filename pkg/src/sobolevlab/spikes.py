"""Concave spike profiles over the punctured disk and their certification.

The base profile ``f(x) = sqrt(1 - |x|^2 - 2 sqrt(3) |x|)`` describes the upper
half of a convex bigraph inside the Klein ball.  Spikes are added one at a
time as ``phi_k = phi_{k-1} + eta_k g((x - y_k) / eps_k)`` with a radial bump
``g`` whose apex is rounded off by an even quartic.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.stats import qmc

from .errors import ConstructionError, DomainError, ParameterError
from .geometry import AmbientModel, GraphHypersurface, induced_metric

SQRT3 = math.sqrt(3.0)
R_MAX = 2.0 - SQRT3
ETA_BAR = 0.02
ETA_FLOOR = 1e-12

# extension of the core 1 - rho - rho^2 to rho in [1/2, 1], in t = 2 rho - 1
_T = Polynomial([0.0, 1.0])
_EXT = (1 - _T) ** 3 * Polynomial([0.25, -0.25, -1.75, 5.0])
_EXT1 = _EXT.deriv()
_EXT2 = _EXT.deriv(2)


def annulus_for_level(j: int) -> tuple:
    """Radii (inner, outer) of the j-th layer D_j minus D_{j-1} of the punctured disk."""
    if j < 1:
        raise ParameterError("layers start at j = 1")
    outer = R_MAX if j == 1 else 1.0 / (j + 7)
    return (1.0 / (j + 8), outer)


def _radial_hessian(d1, d2, u, rho):
    """Hessian of q(|u|) given q', q'' and q'/rho (passed as d1) at rho."""
    n = u.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        uhat = np.where(rho[..., None] > 0, u / np.where(rho > 0, rho, 1.0)[..., None], 0.0)
    P = uhat[..., :, None] * uhat[..., None, :]
    return d2[..., None, None] * P + d1[..., None, None] * (np.eye(n) - P)


@dataclass(frozen=True)
class BaseProfile:
    """Height function of the upper half of the convex bigraph over the disk of radius 2 - sqrt(3)."""

    dim: int = 2
    puncture: float = 0.0

    @staticmethod
    def radial(r):
        r = np.asarray(r, dtype=float)
        return np.sqrt(np.maximum(1.0 - r * r - 2.0 * SQRT3 * r, 0.0))

    def _r(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r <= 0) or np.any(r > R_MAX + 1e-15):
            raise DomainError("base profile is defined for 0 < |x| <= 2 - sqrt(3)")
        return x, r

    def value(self, x):
        _, r = self._r(x)
        return self.radial(np.minimum(r, R_MAX))

    def gradient(self, x):
        x, r = self._r(x)
        F = self.radial(r)
        with np.errstate(divide="ignore"):
            d1 = -(r + SQRT3) / F
        return (d1 / r)[..., None] * x

    def hessian(self, x):
        x, r = self._r(x)
        F = self.radial(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = -(r + SQRT3) / F
            d2 = -(F * F + (r + SQRT3) ** 2) / F**3
        return _radial_hessian(d1 / r, d2, x, r)

    def smooth(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return (r > self.puncture) & (r > 0) & (r < R_MAX)

    def to_dict(self):
        return {"kind": "base", "dim": self.dim, "puncture": self.puncture}


@dataclass(frozen=True)
class SpikeBump:
    """eta * g((x - y) / eps) with the apex rounded off inside |x - y| < delta."""

    center: tuple
    eps: float
    eta: float
    delta: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ParameterError("bump scale must be positive")
        if self.eta < 0:
            raise ParameterError("bump amplitude must be nonnegative")
        if not 0 < self.delta < self.eps / 2:
            raise ParameterError("smoothing radius must lie in (0, eps/2)")

    @property
    def a(self) -> float:
        return self.delta / self.eps

    def apex_coefficients(self):
        a = self.a
        return 1.0 - 3.0 * a / 8.0, -1.0 - 3.0 / (4.0 * a), 1.0 / (8.0 * a**3)

    def radial(self, rho):
        """Unit-amplitude profile q(rho) and q', q'', q'/rho."""
        rho = np.asarray(rho, dtype=float)
        c0, c2, c4 = self.apex_coefficients()
        a = self.a
        t = 2.0 * rho - 1.0
        apex = rho <= a
        core = (rho > a) & (rho <= 0.5)
        ext = (rho > 0.5) & (rho < 1.0)
        q = np.select([apex, core, ext], [c0 + c2 * rho**2 + c4 * rho**4, 1 - rho - rho**2, _EXT(t)], 0.0)
        q1 = np.select([apex, core, ext], [2 * c2 * rho + 4 * c4 * rho**3, -1 - 2 * rho, 2 * _EXT1(t)], 0.0)
        q2 = np.select([apex, core, ext], [2 * c2 + 12 * c4 * rho**2, -2.0 + 0 * rho, 4 * _EXT2(t)], 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            q1r = np.where(apex, 2 * c2 + 4 * c4 * rho**2, q1 / np.where(rho > 0, rho, 1.0))
        return q, q1, q2, q1r

    def _u(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - np.asarray(self.center, dtype=float)) / self.eps
        return u, np.linalg.norm(u, axis=-1)

    def value(self, x):
        _, rho = self._u(x)
        return self.eta * self.radial(rho)[0]

    def gradient(self, x):
        u, rho = self._u(x)
        _, _, _, q1r = self.radial(rho)
        return (self.eta / self.eps * q1r)[..., None] * u

    def hessian(self, x):
        u, rho = self._u(x)
        _, _, q2, q1r = self.radial(rho)
        return self.eta / self.eps**2 * _radial_hessian(q1r, q2, u, rho)

    def to_dict(self):
        return {"center": list(map(float, self.center)), "eps": self.eps, "eta": self.eta,
                "delta": self.delta}


def spike_bump(b: SpikeBump, x):
    return b.value(x)


@dataclass(frozen=True)
class SpikeProfile:
    """Base profile plus an ordered, immutable tuple of bumps living in an annulus."""

    base: BaseProfile = field(default_factory=BaseProfile)
    bumps: tuple = ()
    annulus: tuple = (1.0 / 9.0, R_MAX)
    apex_exclusion: float = 0.0

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def total_amplitude(self) -> float:
        return float(sum(b.eta for b in self.bumps))

    def exclusions(self) -> list:
        ex = []
        if self.base.puncture > 0:
            ex.append(((0.0,) * self.dim, self.base.puncture))
        if self.apex_exclusion > 0:
            ex.extend((tuple(b.center), self.apex_exclusion) for b in self.bumps)
        return ex

    def _add_bumps(self, x, base, method: str):
        # each bump vanishes with all derivatives outside its ball, so only touch nodes inside
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, x.shape[-1])
        out = np.array(base, dtype=float).reshape((len(pts),) + np.shape(base)[x.ndim - 1:])
        for b in self.bumps:
            near = np.flatnonzero(np.sum((pts - np.asarray(b.center)) ** 2, axis=-1) < b.eps**2)
            if len(near):
                out[near] += getattr(b, method)(pts[near])
        return out.reshape(np.shape(base))

    def value(self, x):
        return self._add_bumps(x, self.base.value(x), "value")

    def gradient(self, x):
        return self._add_bumps(x, self.base.gradient(x), "gradient")

    def hessian(self, x):
        return self._add_bumps(x, self.base.hessian(x), "hessian")

    def smooth(self, x):
        x = np.asarray(x, dtype=float)
        ok = self.base.smooth(x)
        for c, rad in self.exclusions():
            ok &= np.linalg.norm(x - np.asarray(c), axis=-1) > rad
        return ok

    def with_bump(self, bump: SpikeBump) -> "SpikeProfile":
        return replace(self, bumps=self.bumps + (bump,))

    def to_dict(self):
        return {"base": self.base.to_dict(), "annulus": list(self.annulus),
                "apex_exclusion": self.apex_exclusion,
                "bumps": [b.to_dict() for b in self.bumps]}

    @classmethod
    def from_dict(cls, d):
        base = BaseProfile(d.get("base", {}).get("dim", 2), d.get("base", {}).get("puncture", 0.0))
        bumps = tuple(SpikeBump(tuple(b["center"]), b["eps"], b["eta"], b["delta"])
                      for b in d.get("bumps", []))
        return cls(base, bumps, tuple(d.get("annulus", (1.0 / 9.0, R_MAX))),
                   d.get("apex_exclusion", 0.0))

    def to_json(self, path=None):
        s = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s

    def surface(self, side: int = 1) -> GraphHypersurface:
        return GraphHypersurface(AmbientModel("klein_ball", self.dim + 1), self, side)


def _surface(profile, side: int = 1) -> GraphHypersurface:
    return GraphHypersurface(AmbientModel("klein_ball", getattr(profile, "dim", 2) + 1), profile, side)


def base_profile(x):
    return BaseProfile().value(x)


# ---------------------------------------------------------------------------
# certification


@dataclass
class ConcavityCertificate:
    step: float
    min_neg_eig: float
    apex_checks: list
    n_points: int
    n_skipped: int
    cone_margin: float = float("nan")

    @property
    def skipped_fraction(self) -> float:
        total = self.n_points + self.n_skipped
        return self.n_skipped / total if total else 0.0

    @property
    def valid(self) -> bool:
        return (self.min_neg_eig > 0 and all(self.apex_checks)
                and self.skipped_fraction <= 0.01)

    def to_dict(self):
        return {"step": self.step, "min_neg_eig": self.min_neg_eig,
                "apex_checks": [bool(a) for a in self.apex_checks], "n_points": self.n_points,
                "n_skipped": self.n_skipped, "cone_margin": self.cone_margin, "valid": self.valid}


def _grid(lo, hi, step, dim):
    axes = [np.arange(lo[k], hi[k] + 0.5 * step, step) for k in range(dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def _apex_check(profile, bump, n_dirs=4, samples=41) -> bool:
    """Second differences along lines through the apex are negative."""
    c = np.asarray(bump.center, float)
    s = np.linspace(-2 * bump.delta, 2 * bump.delta, samples)
    h = s[1] - s[0]
    for k in range(n_dirs):
        ang = math.pi * k / n_dirs
        e = np.zeros(profile.dim)
        e[0], e[1] = math.cos(ang), math.sin(ang)
        vals = profile.value(c + s[:, None] * e)
        if not np.all(np.diff(vals, 2) / h**2 < 0):
            return False
    return True


def certify_concavity(profile, step: float, region=None, cone: bool = True) -> ConcavityCertificate:
    """Check negative-definite Hessian and cone confinement on a grid over the disk.

    ``region`` optionally restricts the grid to a ball ``(center, radius)``.
    """
    if step <= 0:
        raise ParameterError("step must be positive")
    dim = getattr(profile, "dim", 2)
    if region is None:
        center, radius = np.zeros(dim), R_MAX
    else:
        center, radius = np.asarray(region[0], float), float(region[1])
    bumps = [b for b in getattr(profile, "bumps", ())
             if np.linalg.norm(np.asarray(b.center) - center) < radius + b.eps]
    if bumps and step >= min(b.delta for b in bumps):
        raise ParameterError("step must be smaller than every smoothing radius in the region")
    pts = _grid(center - radius, center + radius, step, dim)
    r = np.linalg.norm(pts, axis=-1)
    inside = (np.linalg.norm(pts - center, axis=-1) <= radius) & (r < R_MAX - step) & (r > 0)
    pts = pts[inside]
    smooth = profile.smooth(pts)
    n_skipped = int(np.sum(~smooth))
    pts = pts[smooth]
    if len(pts) == 0:
        return ConcavityCertificate(step, float("nan"), [], 0, n_skipped)
    H = profile.hessian(pts)
    lam = np.linalg.eigvalsh(H)[..., -1]
    margin = float("nan")
    if cone:
        margin = float(np.min(1.0 - SQRT3 * np.linalg.norm(pts, axis=-1) - profile.value(pts)))
    apex = []
    for b in bumps:
        if np.linalg.norm(np.asarray(b.center) - center) < radius:
            apex.append(_apex_check(profile, b))
    return ConcavityCertificate(step, float(np.min(-lam)), apex, len(pts), n_skipped, margin)


# ---------------------------------------------------------------------------
# construction


@dataclass
class SpikeLog:
    """Backtracking history for one add_spike call."""

    tried: list = field(default_factory=list)
    accepted: Optional[float] = None
    reason: str = ""


def constraint_distance(profile: SpikeProfile, y) -> float:
    y = np.asarray(y, float)
    r = float(np.linalg.norm(y))
    d = min(r - profile.annulus[0], profile.annulus[1] - r)
    for b in profile.bumps:
        d = min(d, float(np.linalg.norm(y - np.asarray(b.center))))
    return d


def add_spike(profile: SpikeProfile, y, eps: Optional[float] = None, eta_bar: float = ETA_BAR,
              eta_start: Optional[float] = None, delta_ratio: float = 0.1,
              step: Optional[float] = None, log: Optional[SpikeLog] = None) -> SpikeProfile:
    """Return a new profile with one more bump at ``y``; the amplitude is found by halving."""
    y = tuple(float(v) for v in y)
    dist = constraint_distance(profile, y)
    if dist <= 0:
        raise ParameterError("center must lie inside the annulus and differ from earlier centers")
    if eps is None:
        eps = 0.5 * dist
    if not 0 < eps < dist:
        raise ParameterError(f"eps={eps} must be below the constraint distance {dist}")
    delta = delta_ratio * eps
    if step is None:
        step = min(delta / 2.0, eps / 24.0)
    eta = eta_start if eta_start is not None else eta_bar * 2.0 ** (-len(profile.bumps))
    log = log if log is not None else SpikeLog()
    while eta >= ETA_FLOOR:
        cand = profile.with_bump(SpikeBump(y, eps, eta, delta))
        cert = certify_concavity(cand, step, region=(y, eps))
        log.tried.append((eta, cert.min_neg_eig, cert.cone_margin))
        if cert.valid and cert.cone_margin > 0:
            log.accepted = eta
            return cand
        log.reason = ("concavity" if not cert.valid else "cone confinement")
        eta *= 0.5
    raise ConstructionError(f"no amplitude above {ETA_FLOOR} passes; failing constraint: {log.reason}")


def halton_centers(count: int, annulus: tuple, skip: int = 1) -> np.ndarray:
    """Low-discrepancy points in the annulus (area-uniform in r, uniform in angle)."""
    q = qmc.Halton(d=2, scramble=False).random(count + skip)[skip:]
    r_in, r_out = annulus
    r = np.sqrt(r_in**2 + q[:, 0] * (r_out**2 - r_in**2))
    t = 2 * math.pi * q[:, 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def build_spiked(count: int, annulus: tuple = (1.0 / 9.0, R_MAX), eta_bar: float = ETA_BAR,
                 total_eta: Optional[float] = None, delta_ratio: float = 0.1,
                 centers: Optional[Sequence] = None, eps_fraction: float = 0.5) -> SpikeProfile:
    """Profile with ``count`` spikes placed along the Halton schedule.

    With ``total_eta`` every bump starts at total_eta / count instead of the
    geometric schedule; backtracking may still lower individual amplitudes.
    """
    prof = SpikeProfile(annulus=tuple(annulus))
    pts = halton_centers(count, annulus) if centers is None else np.asarray(centers, float)
    for y in pts:
        start = None if total_eta is None else total_eta / count
        eps = eps_fraction * constraint_distance(prof, y)
        prof = add_spike(prof, y, eps=eps, eta_bar=eta_bar, eta_start=start,
                         delta_ratio=delta_ratio)
    return prof


# ---------------------------------------------------------------------------
# intrinsic distances


def _disk_mesh(resolution: int, annulus=None):
    xs = np.linspace(-R_MAX, R_MAX, resolution)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], -1)
    r = np.linalg.norm(pts, axis=-1)
    lo, hi = (0.0, R_MAX) if annulus is None else annulus
    h = xs[1] - xs[0]
    mask = (r > max(lo, 1.5 * h)) & (r < hi - 0.5 * h)
    return xs, pts, mask


_OFFSETS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]


def graph_distance_matrix(profile, resolution: int, sources, mask=None):
    """Shortest-path distances on a 16-neighbour lattice under the induced metric."""
    xs, pts, m = _disk_mesh(resolution)
    if mask is None:
        mask = m
    mask = mask & profile.smooth(pts)
    idx = -np.ones(mask.shape, int)
    idx[mask] = np.arange(mask.sum())
    surf = _surface(profile)
    rows, cols, w = [], [], []
    N = resolution
    for di, dj in _OFFSETS:
        a = idx[max(0, -di):N - max(0, di), max(0, -dj):N - max(0, dj)]
        b = idx[max(0, di):N + min(0, di) or None, max(0, dj):N + min(0, dj) or None]
        ok = (a >= 0) & (b >= 0)
        pa = pts[max(0, -di):N - max(0, di), max(0, -dj):N - max(0, dj)][ok]
        pb = pts[max(0, di):N + min(0, di) or None, max(0, dj):N + min(0, dj) or None][ok]
        mid = 0.5 * (pa + pb)
        good = profile.smooth(mid)
        d = pb - pa
        g = induced_metric(surf, mid[good])
        length = np.sqrt(np.einsum("...i,...ij,...j->...", d[good], g, d[good]))
        rows.append(a[ok][good])
        cols.append(b[ok][good])
        w.append(length)
    rows, cols, w = map(np.concatenate, (rows, cols, w))
    n = int(mask.sum())
    G = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    ncomp, _ = connected_components(G, directed=False)
    if ncomp != 1:
        raise ConstructionError(f"mesh graph has {ncomp} components after exclusions")
    return dijkstra(G, directed=False, indices=sources), idx, pts, mask


@dataclass
class BilipschitzBounds:
    lower: float
    upper: float
    n_pairs: int
    resolution: int

    @property
    def constant(self) -> float:
        return max(self.upper, 1.0 / self.lower)


def bilipschitz_estimate(profileA, profileB, resolution: int = 48, n_pairs: int = 40,
                         seed: int = 0) -> BilipschitzBounds:
    """min and max of d_A / d_B over a fixed random sample of node pairs."""
    xs, pts, mask = _disk_mesh(resolution)
    mask = mask & profileA.smooth(pts) & profileB.smooth(pts)
    nodes = np.flatnonzero(mask.ravel())
    rng = np.random.default_rng(seed)
    n_src = max(1, min(len(nodes), int(math.ceil(math.sqrt(n_pairs)))))
    src_nodes = rng.choice(nodes, n_src, replace=False)
    pos = -np.ones(mask.size, int)
    pos[nodes] = np.arange(len(nodes))
    src = pos[src_nodes]
    DA, *_ = graph_distance_matrix(profileA, resolution, src, mask)
    DB, *_ = graph_distance_matrix(profileB, resolution, src, mask)
    per = int(math.ceil(n_pairs / n_src))
    ratios = []
    for i in range(n_src):
        tgt = rng.choice(len(nodes), per, replace=False)
        tgt = tgt[tgt != src[i]]
        ratios.extend(DA[i, tgt] / DB[i, tgt])
    ratios = np.asarray(ratios[:n_pairs])
    return BilipschitzBounds(float(ratios.min()), float(ratios.max()), len(ratios), resolution)


# ---------------------------------------------------------------------------
# area and export


def graph_area(profile, n_r: int = 200, n_t: int = 256) -> float:
    """Area of the upper graph under the Klein metric, midpoint rule in (s, t) with r = R(1 - s^2).

    The substitution removes the square-root singularity of the density at |x| = R.
    """
    s = (np.arange(n_r) + 0.5) / n_r
    t = (np.arange(n_t) + 0.5) * 2 * math.pi / n_t
    S, T = np.meshgrid(s, t, indexing="ij")
    r = R_MAX * (1 - S**2)
    x = np.stack([r * np.cos(T), r * np.sin(T)], -1)
    g = induced_metric(_surface(profile), x)
    dens = np.sqrt(np.linalg.det(g)) * r * 2 * R_MAX * S
    return float(np.sum(dens) / n_r * 2 * math.pi / n_t)


def write_height_csv(profile, path, resolution: int = 64) -> int:
    xs, pts, mask = _disk_mesh(resolution)
    mask &= profile.smooth(pts)
    z = profile.value(pts[mask])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for (a, b), c in zip(pts[mask], z):
            w.writerow([f"{a:.12g}", f"{b:.12g}", f"{c:.12g}"])
    return int(mask.sum())


def bigraph_mesh(profile, n_rings: int = 24, n_angles: int = 48):
    """Closed triangulation of the bigraph: apex fans, ring quads, shared equator."""
    radii = R_MAX * np.arange(1, n_rings + 1) / n_rings
    ang = 2 * math.pi * np.arange(n_angles) / n_angles
    verts = [(0.0, 0.0, 1.0)]
    ring_idx = {}
    for side in (1, -1):
        for i, r in enumerate(radii):
            if side == -1 and i == n_rings - 1:
                ring_idx[(side, i)] = ring_idx[(1, i)]
                continue
            xy = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
            z = np.zeros(n_angles) if i == n_rings - 1 else side * profile.value(xy)
            ring_idx[(side, i)] = list(range(len(verts), len(verts) + n_angles))
            verts.extend((float(a), float(b), float(c)) for (a, b), c in zip(xy, z))
    verts.append((0.0, 0.0, -1.0))
    top, bot = 0, len(verts) - 1
    faces = []
    for side, apex in ((1, top), (-1, bot)):
        first = ring_idx[(side, 0)]
        for k in range(n_angles):
            a, b = first[k], first[(k + 1) % n_angles]
            faces.append((apex, a, b) if side == 1 else (apex, b, a))
        for i in range(n_rings - 1):
            inner, outer = ring_idx[(side, i)], ring_idx[(side, i + 1)]
            for k in range(n_angles):
                k1 = (k + 1) % n_angles
                q = [(inner[k], outer[k], outer[k1]), (inner[k], outer[k1], inner[k1])]
                if side == -1:
                    q = [(a, c, b) for a, b, c in q]
                faces.extend(q)
    return np.asarray(verts), np.asarray(faces)


def check_mesh(verts, faces, tol: float = 1e-14) -> dict:
    """Closed-manifold checks: each edge in exactly two faces, consistent orientation, no degenerate faces."""
    from collections import Counter

    undirected = Counter()
    directed = Counter()
    for f in faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            undirected[frozenset((a, b))] += 1
            directed[(a, b)] += 1
    v = np.asarray(verts)
    f = np.asarray(faces)
    areas = 0.5 * np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    V, E, F = len(v), len(undirected), len(f)
    return {
        "vertices": V, "edges": E, "faces": F, "euler": V - E + F,
        "manifold": all(c == 2 for c in undirected.values()),
        "oriented": all(c == 1 for c in directed.values()),
        "min_area": float(areas.min()),
        "nondegenerate": bool(areas.min() > tol),
        "valid": (V - E + F == 2 and all(c == 2 for c in undirected.values())
                  and all(c == 1 for c in directed.values()) and bool(areas.min() > tol)),
    }


def write_obj(profile, path, n_rings: int = 24, n_angles: int = 48) -> dict:
    verts, faces = bigraph_mesh(profile, n_rings, n_angles)
    with open(path, "w") as fh:
        fh.write("# convex bigraph\n")
        for a, b, c in verts:
            fh.write(f"v {a:.10g} {b:.10g} {c:.10g}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    return check_mesh(verts, faces)
