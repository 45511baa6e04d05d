"""Figures for experiment reports (Agg backend, files only)."""
from __future__ import annotations

import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_curves(curves, path, title: str = "", logy: bool = True) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for c in curves:
        vals = np.asarray(c.values, float)
        if logy and np.all(vals <= 0):
            continue
        ax.plot(c.grid, np.abs(vals) if logy else vals, marker="o", label=c.name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("parameter")
    ax.set_title(title)
    if 0 < len(curves) <= 12:
        ax.legend(fontsize=6)
    _save(fig, path)


def plot_checks(checks, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.18 * len(checks) + 1)))
    names = [c.name for c in checks]
    ratios = [min(c.ratio, 10.0) for c in checks]
    colors = ["tab:green" if c.passed else ("tab:orange" if not c.enforce else "tab:red") for c in checks]
    y = np.arange(len(checks))
    ax.barh(y, ratios, color=colors)
    for y0, c in zip(y, checks):
        ax.plot([1 + c.tolerance] * 2, [y0 - 0.4, y0 + 0.4], color="k", lw=0.8)
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=5)
    ax.set_xlabel("lhs / rhs")
    ax.set_title(title)
    _save(fig, path)


def plot_field(values, extent, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(np.asarray(values).T, origin="lower", extent=extent, cmap="RdBu_r")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    _save(fig, path)


def _save(fig, path) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
