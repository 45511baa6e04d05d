"""Measured checks and experiment records."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


@dataclass
class InequalityCheck:
    """lhs <= rhs up to a relative tolerance; passes iff lhs/rhs <= 1 + tolerance."""

    name: str
    lhs: float
    rhs: float
    tolerance: float = 0.05
    provenance: dict = field(default_factory=dict)
    enforce: bool = True

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs <= 0 else math.inf
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.ratio <= 1.0 + self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(ratio=self.ratio, passed=self.passed)
        return _clean(d)


@dataclass
class DecayCurve:
    """Values along a strictly increasing parameter grid."""

    name: str
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")

    @property
    def trend(self) -> float:
        """Fraction of steps along which the value does not increase."""
        if len(self.values) < 2:
            return 1.0
        return float(np.mean(np.diff(self.values) <= 0))

    @property
    def limit_estimate(self) -> float:
        """Aitken extrapolation of the last three values, or the last value."""
        v = self.values
        if len(v) >= 3:
            d1, d2 = v[-1] - v[-2], v[-2] - v[-3]
            if d2 != d1 and abs(d1) < abs(d2):
                return float(v[-1] - d1 * d1 / (d1 - d2))
        return float(v[-1])

    @property
    def final_ratio(self) -> float:
        if self.values[0] == 0:
            return 0.0
        return float(self.values[-1] / self.values[0])

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "grid": self.grid, "values": self.values,
                       "trend": self.trend, "limit_estimate": self.limit_estimate, "meta": self.meta})

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", self.name])
            for g, v in zip(self.grid, self.values):
                w.writerow([f"{g:.12g}", f"{v:.12g}"])


@dataclass
class ExperimentReport:
    """Rows of measurements plus pass/fail checks for one experiment."""

    name: str
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks if c.enforce)

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "rows": self.rows,
            "checks": [c.to_dict() for c in self.checks],
            "curves": [c.to_dict() for c in self.curves],
            "meta": self.meta,
            "error": self.error,
            "passed": self.passed,
        })

    def write_csv(self, path) -> None:
        if not self.rows:
            cols = ["name", "lhs", "rhs", "ratio", "tolerance", "passed"]
            rows = [{k: c.to_dict()[k] for k in cols} for c in self.checks]
        else:
            rows = self.rows
            cols = list(dict.fromkeys(k for r in rows for k in r))
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(r.get(k, "")) for k in cols})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return v
