"""Smooth test fields and distance functions on the lattice charts."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..calculus import DiscreteField, Mesh
from ..errors import ParameterError


def chart_distance(chart, x, o=None) -> np.ndarray:
    """Riemannian distance from ``o`` (default: the origin) for charts with a closed form."""
    x = np.asarray(x, float)
    o = np.zeros(x.shape[-1]) if o is None else np.asarray(o, float)
    if chart.kind == "euclidean":
        return np.linalg.norm(x - o, axis=-1)
    if chart.kind == "klein":
        num = 1.0 - np.sum(x * o, axis=-1)
        den = np.sqrt((1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(o * o)))
        return np.arccosh(np.maximum(num / den, 1.0))
    if chart.kind == "halfspace":
        d2 = np.sum((x - o) ** 2, axis=-1)
        return np.arccosh(1.0 + d2 / (2.0 * x[..., -1] * o[-1]))
    raise ParameterError(f"no closed-form distance on chart kind {chart.kind!r}")


def _window(s, power):
    return np.clip(1.0 - s, 0.0, None) ** power


@dataclass(frozen=True)
class Bump:
    """A * (1 - q(x - c))_+^power * (1 + depth cos(k.x + phase)), q a positive quadratic form.

    Positive wherever the window is, so |f|^{p/2} inherits the smoothness of the window.
    """

    center: tuple
    form: tuple
    amplitude: float = 1.0
    power: int = 6
    wave: tuple = (0.0, 0.0)
    phase: float = 0.0
    depth: float = 0.0
    gaussian: float = 0.0

    def __call__(self, x):
        d = np.asarray(x, float) - np.asarray(self.center)
        Q = np.asarray(self.form)
        q = np.einsum("...i,ij,...j->...", d, Q, d)
        out = self.amplitude * _window(q, self.power)
        if self.depth:
            out = out * (1.0 + self.depth * np.cos(d @ np.asarray(self.wave) + self.phase))
        if self.gaussian:
            out = out * np.exp(-np.sum(d * d, axis=-1) / self.gaussian**2)
        return out

    @property
    def extent(self) -> float:
        """Largest Euclidean distance of the support from the center."""
        return float(1.0 / np.sqrt(np.min(np.linalg.eigvalsh(np.asarray(self.form)))))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RadialBump:
    """A * (1 - (d/rho)^2)_+^power with d the chart distance from ``center``."""

    chart_kind: str
    rho: float
    amplitude: float = 1.0
    power: int = 6
    center: tuple = (0.0, 0.0)

    def field(self, mesh: Mesh) -> DiscreteField:
        def fn(x):
            d = chart_distance(mesh.chart, x, self.center)
            return self.amplitude * _window((d / self.rho) ** 2, self.power)
        return mesh.sample(fn)

    def to_dict(self) -> dict:
        return asdict(self)


def random_bumps(count: int, seed: int = 0, reach: float = 0.7, radii=(0.25, 0.5),
                 dim: int = 2) -> list:
    """Randomized positive bumps whose supports stay inside the Euclidean ball of radius ``reach``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(*radii, size=dim)
        rot, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        Q = rot @ np.diag(1.0 / a**2) @ rot.T
        c = rng.normal(size=dim)
        c *= rng.uniform(0, max(reach - a.max(), 0.0)) / np.linalg.norm(c)
        out.append(Bump(center=tuple(c), form=tuple(map(tuple, Q)),
                        amplitude=float(rng.uniform(0.5, 2.0)),
                        wave=tuple(rng.normal(scale=4.0, size=dim)),
                        phase=float(rng.uniform(0, 2 * np.pi)),
                        depth=float(rng.uniform(0.0, 0.5))))
    return out


def gaussian_windowed_bump(radius: float = 0.6, sigma: float = 0.3) -> Bump:
    return Bump(center=(0.0, 0.0), form=((1 / radius**2, 0.0), (0.0, 1 / radius**2)),
                power=6, gaussian=sigma)


def sample(mesh: Mesh, bump) -> DiscreteField:
    if isinstance(bump, RadialBump):
        return bump.field(mesh)
    return mesh.sample(bump)
