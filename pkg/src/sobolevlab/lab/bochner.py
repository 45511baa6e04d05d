"""Pointwise Bochner identity for scalar fields on lattice charts."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..calculus import DiscreteField, gradient, hessian, integrate, laplacian, raise_all


def bochner_terms(u: DiscreteField) -> dict:
    """The four terms of 1/2 Lap|grad u|^2 = |Hess u|^2 + Ric(grad u, grad u) + <grad Lap u, grad u>."""
    mesh = u.mesh
    du = gradient(u)
    up = raise_all(mesh, du.data)
    sq = DiscreteField(mesh, np.einsum("...i,...i->...", up, du.data), du.flagged)
    lap_sq = laplacian(sq)
    H = hessian(u)
    lap_u = laplacian(u)
    d_lap = gradient(lap_u)
    flagged = lap_sq.flagged | H.flagged | d_lap.flagged
    return {
        "half_lap_grad_sq": 0.5 * lap_sq.values,
        "hess_sq": H.norm_pointwise() ** 2,
        "ricci": np.einsum("...ij,...i,...j->...", mesh.ricci, up, up),
        "grad_lap_dot_grad": np.einsum("...i,...i->...", up, d_lap.data),
        "grad_sq": sq.values,
        "lap": lap_u.values,
        "flagged": flagged,
    }


def bochner_residual(u: DiscreteField, region: Optional[np.ndarray] = None, terms=None) -> float:
    """L^1 norm of the Bochner defect over unflagged nodes (optionally inside ``region``)."""
    t = bochner_terms(u) if terms is None else terms
    defect = t["half_lap_grad_sq"] - t["hess_sq"] - t["ricci"] - t["grad_lap_dot_grad"]
    valid = ~(u.mesh.mask | t["flagged"])
    if region is not None:
        valid &= region
    return integrate(u.mesh, np.abs(defect), valid)
