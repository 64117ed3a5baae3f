"""Report containers shared by the verification modules."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np


@dataclass
class BoundSpec:
    name: str
    kernel_kind: str
    shape: str = ""
    exponents: dict = field(default_factory=dict)
    N_list: tuple = (1, 2, 4)


@dataclass
class BoundReport:
    """Empirical constants and fits for one estimate.

    ``empirical_sup`` is the sup over the sweep of kernel / envelope; the
    existential constants of the estimate become this finite number.
    """

    bound: BoundSpec
    empirical_sup: float = 0.0
    argmax: Any = None
    refinement_ratio: Optional[float] = None
    fits: dict = field(default_factory=dict)
    passed: bool = True
    details: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.bound.name

    def to_json(self) -> dict:
        d = asdict(self)
        return _clean(d)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x over positive pairs."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
