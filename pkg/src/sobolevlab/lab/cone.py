"""Harmonic functions near the apex of a flat cone dr^2 + c^2 r^2 dphi^2, c = theta / 2 pi."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from ..errors import ParameterError
from ..report import DecayCurve


def solve_cone_dirichlet(theta: float, mode: int = 1, step: float = 1 / 256, n_phi: int = 256):
    """Five-point polar finite volumes for Lap u = 0 on the unit cone disk, u = cos(mode phi) at r = 1.

    phi runs over [0, 2 pi) so the boundary data is cos(mode * psi * 2 pi / theta) in the
    arclength angle psi = c phi.  Returns (r, phi, u) with u[0, :] the apex value.
    """
    if not 0 < theta <= 2 * math.pi + 1e-12:
        raise ParameterError("total angle must lie in (0, 2 pi]; larger cones are outside the model")
    c = theta / (2 * math.pi)
    N = int(round(1.0 / step))
    h = 1.0 / N
    dphi = 2 * math.pi / n_phi
    r = np.arange(N + 1) * h
    phi = np.arange(n_phi) * dphi
    # unknowns: apex (index 0) and rings i = 1..N-1
    def k(i, j):
        return 1 + (i - 1) * n_phi + (j % n_phi)

    n = 1 + (N - 1) * n_phi
    rows, cols, vals = [], [], []
    b = np.zeros(n)
    g = np.cos(mode * phi)
    # apex: flux balance through the circle r = h/2
    rows += [0] * (n_phi + 1)
    cols += [k(1, j) for j in range(n_phi)] + [0]
    vals += [1.0] * n_phi + [-float(n_phi)]
    for i in range(1, N):
        ri, rp, rm = r[i], r[i] + h / 2, r[i] - h / 2
        a_out, a_in = rp / (ri * h * h), rm / (ri * h * h)
        a_ang = 1.0 / (c * c * ri * ri * dphi * dphi)
        for j in range(n_phi):
            row = k(i, j)
            rows += [row] * 3
            cols += [row, k(i, j + 1), k(i, j - 1)]
            vals += [-(a_out + a_in + 2 * a_ang), a_ang, a_ang]
            rows.append(row)
            cols.append(0 if i == 1 else k(i - 1, j))
            vals.append(a_in)
            if i + 1 == N:
                b[row] -= a_out * g[j]
            else:
                rows.append(row)
                cols.append(k(i + 1, j))
                vals.append(a_out)
    A = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    x = spsolve(A, b)
    u = np.empty((N + 1, n_phi))
    u[0] = x[0]
    u[1:N] = x[1:].reshape(N - 1, n_phi)
    u[N] = g
    return r, phi, u


def _cell_energy(r, phi, u, c):
    """|grad u|^2 at cell centres and the cell areas."""
    h = r[1] - r[0]
    dphi = phi[1] - phi[0]
    un = np.roll(u, -1, axis=1)
    ur = 0.5 * ((u[1:] - u[:-1]) + (un[1:] - un[:-1])) / h
    up = 0.5 * ((un[1:] - u[1:]) + (un[:-1] - u[:-1])) / dphi
    rc = 0.5 * (r[1:] + r[:-1])
    grad2 = ur**2 + (up / (c * rc[:, None])) ** 2
    area = np.broadcast_to((c * rc * h * dphi)[:, None], grad2.shape)
    return rc, grad2, area


def cone_energy_decay(theta: float, mode: int = 1, radii: Sequence[float] = (0.125, 0.25, 0.5, 1.0),
                      step: float = 1 / 256, n_phi: int = 256, fit_range=(0.02, 0.2)) -> DecayCurve:
    """Mean-energy ratios fint_{B_{rho/2}} |grad u|^2 / fint_{B_rho} |grad u|^2 for rho in ``radii``.

    meta carries the gradient exponent fitted on ``fit_range`` (log-log fit of the
    angular RMS of |grad u|) and the separation-of-variables predictions
    alpha - 1 and 2^{-2(alpha - 1)} with alpha = 2 pi mode / theta.
    """
    c = theta / (2 * math.pi)
    r, phi, u = solve_cone_dirichlet(theta, mode, step, n_phi)
    rc, grad2, area = _cell_energy(r, phi, u, c)

    def mean_energy(rho):
        sel = rc < rho
        return float(np.sum(grad2[sel] * area[sel]) / np.sum(area[sel]))

    radii = sorted(float(x) for x in radii)
    ratios = [mean_energy(rho / 2) / mean_energy(rho) for rho in radii]
    rms = np.sqrt(np.mean(grad2, axis=1))
    sel = (rc >= fit_range[0]) & (rc <= fit_range[1])
    slope = float(np.polyfit(np.log(rc[sel]), np.log(rms[sel]), 1)[0])
    alpha = 2 * math.pi * mode / theta
    meta = {"theta": theta, "mode": mode, "step": step, "n_phi": n_phi,
            "fitted_exponent": slope, "expected_exponent": alpha - 1,
            "expected_ratio": 2.0 ** (-2 * (alpha - 1)), "fit_range": list(fit_range)}
    return DecayCurve("energy_ratio", radii, ratios, meta)
