"""
Potential diagnostics: reverse Holder and doubling constants, the critical
radius rho(x) = 1 / m(x, V), and comparability of rho at nearby points.

Balls are discrete: y is in B(x, r) iff the torus distance |x - y| < r
(strict).  Ball integrals are cell sums times the cell volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import GridSpec
from .reports import BoundReport, BoundSpec


@dataclass
class BallConstant:
    value: float
    per_ball: list = field(default_factory=list)
    flagged: list = field(default_factory=list)


@dataclass
class PotentialProfile:
    values: np.ndarray
    grid: GridSpec
    q: float = 2.0
    rh_constant: float = float("nan")
    doubling_C0: float = float("nan")
    rho: Optional[np.ndarray] = None
    d_exp: float = 1.0
    out_of_theory: bool = False

    @property
    def rho_is_finite(self) -> bool:
        return self.rho is not None and bool(np.isfinite(self.rho).any())


def ball_family(grid: GridSpec, stride: int = 4, r_min: Optional[float] = None, r_max: Optional[float] = None):
    """Lattice centers every ``stride`` points, dyadic radii from r_min up to r_max."""
    r_min = 2 * min(grid.spacing) if r_min is None else r_min
    r_max = grid.half_width / 2 if r_max is None else r_max
    radii = []
    r = r_min
    while r <= r_max * (1 + 1e-12):
        radii.append(r)
        r *= 2
    axes = [range(0, n, stride) for n in grid.sizes]
    centers = [grid.index(mi) for mi in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, grid.dim)]
    return [(c, rr) for c in centers for rr in radii]


def _offsets(grid: GridSpec):
    """Displacements from the origin point, sorted by torus distance."""
    disp = grid.displacement(0)
    dist = np.linalg.norm(disp, axis=1)
    order = np.argsort(dist, kind="stable")
    multi = np.stack(np.unravel_index(order, grid.sizes), axis=1)
    return dist[order], multi


def _ball_mask(grid: GridSpec, center: int, r: float) -> np.ndarray:
    return grid.distance(center) < r


def reverse_holder_constant(V: np.ndarray, grid: GridSpec, q: float, family) -> BallConstant:
    """max over the family of (avg_B V^q)^(1/q) / avg_B V."""
    if q <= 1:
        raise ValueError("q must exceed 1")
    V = np.asarray(V, dtype=float)
    if np.any(V < 0) or not V.any():
        raise ValueError("V must be nonnegative and not identically zero")
    best, per_ball, flagged = 1.0, [], []
    dist_cache = {}
    for c, r in family:
        if r > grid.half_width:
            raise ValueError("ball radius exceeds half the torus width")
        if c not in dist_cache:
            dist_cache[c] = grid.distance(c)
        inside = V[dist_cache[c] < r]
        mean = inside.mean()
        if mean == 0:
            flagged.append((c, r))
            ratio = 1.0
        else:
            ratio = float(np.mean(inside**q) ** (1 / q) / mean)
        per_ball.append(ratio)
        best = max(best, ratio)
    return BallConstant(best, per_ball, flagged)


def doubling_constant(V: np.ndarray, grid: GridSpec, family) -> BallConstant:
    """max over the family of int_{B(x,2r)} V / int_{B(x,r)} V."""
    V = np.asarray(V, dtype=float)
    best, per_ball, flagged = 1.0, [], []
    dist_cache = {}
    for c, r in family:
        if 2 * r > grid.half_width:
            flagged.append((c, r, "radius cap"))
            continue
        if c not in dist_cache:
            dist_cache[c] = grid.distance(c)
        d = dist_cache[c]
        small = V[d < r].sum()
        if small == 0:
            flagged.append((c, r, "zero mass"))
            continue
        ratio = float(V[d < 2 * r].sum() / small)
        per_ball.append(ratio)
        best = max(best, ratio)
    return BallConstant(best, per_ball, flagged)


def radius_ladder(grid: GridSpec, rel: float = 1e-3, r_min: Optional[float] = None, r_max: Optional[float] = None):
    """Dyadic radii from r_max down to r_min, refined geometrically to ``rel``."""
    r_max = grid.half_width if r_max is None else r_max
    r_min = 0.5 * min(grid.spacing) if r_min is None else r_min
    n_octaves = max(1, math.ceil(math.log2(r_max / r_min)))
    per_octave = math.ceil(math.log(2) / math.log1p(rel))
    k = np.arange(n_octaves * per_octave + 1)
    return np.sort(r_max * 2.0 ** (-k / per_octave))


def _resolve_exponent(grid: GridSpec, d_exp):
    if d_exp is None:
        if grid.dim < 3:
            raise ValueError("dim < 3 needs an explicit d_exp (outside the n >= 3 theory)")
        return float(grid.dim - 2), False
    return float(d_exp), grid.dim < 3


def critical_radius_field(
    V: np.ndarray, grid: GridSpec, d_exp: Optional[float] = None, points: Optional[Sequence[int]] = None,
    ladder: Optional[np.ndarray] = None,
) -> np.ndarray:
    """rho(x) for each requested point; +inf where no ladder radius violates the bound.

    rho(x) is the largest ladder radius r with r^(-d_exp) * int_{B(x,r)} V <= 1.
    """
    e, _ = _resolve_exponent(grid, d_exp)
    V = np.asarray(V, dtype=float)
    points = np.arange(grid.n_points) if points is None else np.asarray(points, dtype=int)
    ladder = radius_ladder(grid) if ladder is None else np.asarray(ladder)
    sorted_dist, offsets = _offsets(grid)
    # number of offsets with distance < r, for every ladder radius
    counts = np.searchsorted(sorted_dist, ladder, side="left")
    scale = ladder ** (-e) * grid.cell_volume
    sizes = np.asarray(grid.sizes)
    out = np.empty(len(points))
    vg = V.reshape(grid.sizes)
    chunk = max(1, 2_000_000 // grid.n_points)
    for start in range(0, len(points), chunk):
        pts = points[start:start + chunk]
        base = np.stack(np.unravel_index(pts, grid.sizes), axis=1)
        idx = (base[:, None, :] + offsets[None, :, :]) % sizes
        vals = vg[tuple(idx[..., k] for k in range(grid.dim))]
        cum = np.concatenate([np.zeros((len(pts), 1)), np.cumsum(vals, axis=1)], axis=1)
        F = cum[:, counts] * scale
        ok = F <= 1.0
        for i in range(len(pts)):
            if ok[i].all():
                out[start + i] = np.inf
            elif not ok[i].any():
                out[start + i] = ladder[0]
            else:
                out[start + i] = ladder[np.nonzero(ok[i])[0][-1]]
    return out


def critical_radius(V: np.ndarray, grid: GridSpec, x: int, d_exp: Optional[float] = None) -> float:
    return float(critical_radius_field(V, grid, d_exp, points=[x])[0])


def build_profile(
    V: np.ndarray, grid: GridSpec, q: float = 2.0, d_exp: Optional[float] = None, family=None
) -> PotentialProfile:
    e, flag = _resolve_exponent(grid, d_exp)
    V = np.asarray(V, dtype=float)
    prof = PotentialProfile(values=V, grid=grid, q=q, d_exp=e, out_of_theory=flag)
    if V.any():
        fam = ball_family(grid) if family is None else family
        prof.rh_constant = reverse_holder_constant(V, grid, q, fam).value
        prof.doubling_C0 = doubling_constant(V, grid, fam).value
        prof.rho = critical_radius_field(V, grid, e)
    else:
        prof.rho = np.full(grid.n_points, np.inf)
    return prof


def verify_rho_comparability(profile: PotentialProfile, window=(1 / 8, 8.0), points=None) -> BoundReport:
    """Band of rho(y)/rho(x) over pairs with |x - y| <= rho(x)/2."""
    grid = profile.grid
    rho = profile.rho
    spec = BoundSpec("rho_comparability", "rho", shape="rho(y)/rho(x) for |x-y| <= rho(x)/2")
    report = BoundReport(spec)
    finite = np.isfinite(rho)
    if not finite.any():
        report.passed = False
        report.details["reason"] = "rho infinite everywhere"
        return report
    candidates = np.nonzero(finite)[0] if points is None else np.asarray(points)
    lo, hi = np.inf, 0.0
    for x in candidates:
        d = grid.distance(x)
        near = (d <= rho[x] / 2) & finite
        ratios = rho[near] / rho[x]
        lo = min(lo, float(ratios.min()))
        hi = max(hi, float(ratios.max()))
    report.empirical_sup = hi
    report.fits = {"ratio_min": lo, "ratio_max": hi}
    report.passed = bool(lo >= window[0] and hi <= window[1])
    return report


def fit_rho_growth(profile: PotentialProfile, points=None) -> BoundReport:
    """Smallest exponents l0 (growth of m) and the ball-mass growth rate beyond rho."""
    grid = profile.grid
    rho = profile.rho
    V = profile.values
    finite = np.nonzero(np.isfinite(rho))[0]
    pts = finite if points is None else np.asarray(points)
    l0 = 0.0
    mass_slopes = []
    for x in pts:
        d = grid.distance(x)
        m_x = 1 / rho[x]
        others = finite[finite != x]
        s = np.log1p(d[others] * m_x)
        ratio = np.log(rho[x] / rho[others])  # log(m(y)/m(x))
        keep = s > 1e-12
        if keep.any():
            l0 = max(l0, float(np.max(np.abs(ratio[keep]) / s[keep])))
        radii = rho[x] * 2.0 ** np.arange(0, 4)
        radii = radii[radii <= grid.half_width]
        if len(radii) >= 2:
            mass = [r ** (-profile.d_exp) * V[d < r].sum() * grid.cell_volume for r in radii]
            mass_slopes.append(float(np.polyfit(np.log(radii * m_x), np.log(np.maximum(mass, 1e-300)), 1)[0]))
    spec = BoundSpec("rho_growth", "rho", shape="m(y) <~ (1+|x-y| m(x))^l0 m(x); R^(2-n) int_B V <~ (R m)^l0")
    return BoundReport(spec, empirical_sup=l0, fits={"l0_growth": l0, "mass_growth_slope_max": max(mass_slopes, default=float("nan"))})
