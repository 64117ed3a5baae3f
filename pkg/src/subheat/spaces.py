"""
Function spaces attached to L: Campanato norms with the critical-radius
switch, H^p atoms, the conical area function, Carleson-type square
functionals, the L^2 isometry of t^(beta/alpha) L^beta e^(-t L^alpha), and the
fractional Cauchy problem.

Balls are discrete (strict torus distance) and |B| is the cell count times
the cell volume.  Time integrals over (0, r_B^(2 alpha)] use log-spaced
trapezoid nodes on [t_floor * r_B^(2 alpha), r_B^(2 alpha)]; the omitted
head is estimated from the small-t power law of the integrand and reported
as an error bar.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .fractional import FracDerivativeSpec, weyl_magnitude_multiplier
from .grid import GridSpec
from .potential import PotentialProfile
from .reports import BoundReport, BoundSpec
from .spectral import SpectralDecomposition, gradient

log = logging.getLogger(__name__)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


# ---------------------------------------------------------------------------
# balls and Campanato norms
# ---------------------------------------------------------------------------


@dataclass
class BallFamily:
    grid: GridSpec
    balls: list
    rho: Optional[np.ndarray] = None

    @classmethod
    def from_lattice(cls, grid: GridSpec, stride: int, radii: Sequence[float], rho=None) -> "BallFamily":
        axes = [range(0, n, stride) for n in grid.sizes]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, grid.dim)
        centers = [grid.index(mi) for mi in mesh]
        return cls.from_points(grid, centers, radii, rho)

    @classmethod
    def from_points(cls, grid: GridSpec, centers: Sequence[int], radii: Sequence[float], rho=None) -> "BallFamily":
        for r in radii:
            if r > grid.half_width:
                raise ValueError("ball radius exceeds the torus half-width")
        return cls(grid, [(int(c), float(r)) for c in centers for r in radii], rho)

    @classmethod
    def from_positions(cls, grid: GridSpec, positions, radii, rho=None) -> "BallFamily":
        return cls.from_points(grid, [grid.nearest_index(p) for p in positions], radii, rho)

    def classification(self) -> list:
        if self.rho is None:
            return ["super_critical"] * len(self.balls)
        return ["sub_critical" if r < self.rho[c] else "super_critical" for c, r in self.balls]

    def mask(self, ball) -> np.ndarray:
        c, r = ball
        return self.grid.distance(c) < r

    def volume(self, ball) -> float:
        return float(self.mask(ball).sum() * self.grid.cell_volume)


@dataclass
class CampanatoResult:
    gamma: float
    norm_value: float
    achieving_ball: Optional[tuple]
    p_used: int
    per_ball: list = field(default_factory=list)


def campanato_norm(f: np.ndarray, gamma: float, family: BallFamily, p: int = 1) -> CampanatoResult:
    """sup_B |B|^(-gamma/n) (avg_B |f - f(B,V)|^p)^(1/p).

    f(B,V) is the ball mean on sub-critical balls (r_B < rho(x_B)) and 0 on
    the others.
    """
    if not family.balls:
        raise ValueError("empty ball family")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    grid = family.grid
    n = grid.dim
    f = np.asarray(f, dtype=float)
    best, arg, per_ball = -1.0, None, []
    for ball, cls in zip(family.balls, family.classification()):
        inside = f[family.mask(ball)]
        ref = inside.mean() if cls == "sub_critical" else 0.0
        vol = inside.size * grid.cell_volume
        val = vol ** (-gamma / n) * np.mean(np.abs(inside - ref) ** p) ** (1 / p)
        per_ball.append(float(val))
        if val > best:
            best, arg = float(val), ball
    return CampanatoResult(gamma, best, arg, p, per_ball)


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------


@dataclass
class Atom:
    center: int
    radius: float
    p: float
    values: np.ndarray
    has_cancellation: bool
    valid: bool = True

    def support(self, grid: GridSpec) -> np.ndarray:
        return grid.distance(self.center) < self.radius


def generate_atom(profile: PotentialProfile, center: int, radius: float, p: float,
                  with_cancellation: bool = True, seed: int = 0, strict: bool = True) -> Atom:
    """Seeded raised-cosine bump on B(center, radius), sup-normalized to |B|^(-1/p).

    The bump peak is shifted by a seeded offset inside radius/4 and the bump
    is mean-subtracted on the ball when ``with_cancellation``.  With
    ``strict`` the atom conditions are enforced: radius <= rho(center), and
    mean zero is required when radius <= rho(center)/4.
    """
    grid = profile.grid
    rho_c = float(profile.rho[center])
    if radius > rho_c:
        raise ValueError("atom radius exceeds the critical radius at its center")
    if with_cancellation and radius > rho_c / 4 and strict:
        raise ValueError("mean-zero atoms need radius <= rho/4")
    needs_zero_mean = radius <= rho_c / 4
    valid = with_cancellation or not needs_zero_mean
    if strict and not valid:
        raise ValueError("atoms with radius <= rho/4 must have mean zero")
    rng = np.random.default_rng(seed)
    offset = rng.uniform(-1, 1, grid.dim)
    offset *= radius / 4 * rng.uniform() / max(np.linalg.norm(offset), 1e-12)
    support = grid.distance(center) < radius
    if support.sum() < 2 and with_cancellation:
        raise ValueError("ball too small for a mean-zero atom")
    d = np.linalg.norm(grid.displacement(center) - offset, axis=1)
    bump = np.where(support, 0.5 * (1 + np.cos(np.pi * np.minimum(d / radius, 1.0))), 0.0)
    if with_cancellation:
        bump[support] -= bump[support].mean()
    vol = support.sum() * grid.cell_volume
    values = bump * (vol ** (-1 / p) / np.abs(bump).max())
    return Atom(center, radius, p, values, with_cancellation, valid)


# ---------------------------------------------------------------------------
# area function
# ---------------------------------------------------------------------------


def _ball_counts_fft(grid: GridSpec, fields: np.ndarray, radius: float) -> tuple:
    """Periodic ball sums of each column of ``fields`` and the ball cell count."""
    kernel = (grid.distance(0) < radius).astype(float)
    count = int(kernel.sum())
    axes = tuple(range(grid.dim))
    kh = np.fft.rfftn(kernel.reshape(grid.sizes))
    out = np.empty_like(fields)
    for j in range(fields.shape[1]):
        fh = np.fft.rfftn(fields[:, j].reshape(grid.sizes))
        # symmetric kernel: convolution equals correlation
        out[:, j] = np.fft.irfftn(fh * kh, s=grid.sizes, axes=axes).ravel()
    return out, count


def _log_nodes(t_lo: float, t_hi: float, n_nodes: int):
    v = np.linspace(math.log(t_lo), math.log(t_hi), n_nodes)
    w = np.full(n_nodes, v[1] - v[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.exp(v), w  # weights for dt/t


def area_function(spec: SpectralDecomposition, alpha: float, beta: float, f: np.ndarray,
                  t_range: Optional[tuple] = None, n_nodes: int = 48) -> np.ndarray:
    """S(f)(x) for every x: the conical square function of t^(beta/alpha) L^beta e^(-t L^alpha) f.

    The cone section at height t is the discrete ball B(x, t^(1/(2 alpha))).
    The measure dy dt / t^(n/(2 alpha)+1) is realized as
    omega_n * (ball sum * cell volume / |B_discrete|) dt/t, i.e. the
    continuum ball volume omega_n t^(n/(2 alpha)) is replaced by the exact
    discrete ball volume.
    """
    grid = spec.grid
    n = grid.dim
    if t_range is None:
        t_range = (1e-4, (grid.half_width / 2) ** (2 * alpha))
    ts, ws = _log_nodes(t_range[0], t_range[1], n_nodes)
    c = spec.coefficients(np.asarray(f, dtype=float))
    lam_b = spec.power(beta)
    mu = spec.power(alpha)
    total = np.zeros(grid.n_points)
    for t, w in zip(ts, ws):
        g = t ** (beta / alpha) * lam_b * np.exp(-t * mu)
        u2 = spec.synthesize(g * c) ** 2
        sums, count = _ball_counts_fft(grid, u2[:, None], t ** (1 / (2 * alpha)))
        total += w * sums[:, 0] / count
    return np.sqrt(unit_ball_volume(n) * np.maximum(total, 0.0))


def area_function_bruteforce(spec: SpectralDecomposition, alpha: float, beta: float, f: np.ndarray,
                             x: int, t_range: tuple, n_nodes: int = 48) -> float:
    """Direct double sum for a single x (reference implementation)."""
    grid = spec.grid
    ts, ws = _log_nodes(t_range[0], t_range[1], n_nodes)
    d = grid.distance(x)
    total = 0.0
    for t, w in zip(ts, ws):
        g = t ** (beta / alpha) * spec.power(beta) * np.exp(-t * spec.power(alpha))
        u = spec.apply(g, f)
        ball = d < t ** (1 / (2 * alpha))
        acc = 0.0
        for y in np.nonzero(ball)[0]:
            acc += u[y] ** 2
        total += w * acc / ball.sum()
    return math.sqrt(unit_ball_volume(grid.dim) * total)


def lp_quasinorm(grid: GridSpec, f: np.ndarray, p: float) -> float:
    return float((np.sum(np.abs(f) ** p) * grid.cell_volume) ** (1 / p))


def atom_area_check(spec: SpectralDecomposition, alpha: float, beta: float, gamma: float,
                    atoms: Sequence[Atom], window: float = 8.0, **kw) -> BoundReport:
    """||S(a)||_{L^(n/(n+gamma))} over an atom family; passes when max/min <= window."""
    if not 0 < gamma < min(1.0, 2 * alpha, 2 * alpha * beta):
        raise ValueError("need 0 < gamma < min(1, 2 alpha, 2 alpha beta)")
    grid = spec.grid
    p = grid.dim / (grid.dim + gamma)
    norms = [lp_quasinorm(grid, area_function(spec, alpha, beta, a.values, **kw), p) for a in atoms]
    bspec = BoundSpec("atom_area", "tilde_D", shape="||S(a)||_{L^(n/(n+gamma))} <= C",
                      exponents={"alpha": alpha, "beta": beta, "gamma": gamma, "p": p}, N_list=(0,))
    rep = BoundReport(bspec)
    positive = [v for v in norms if v > 0]
    spread = max(positive) / min(positive) if positive else float("nan")
    rep.empirical_sup = max(norms) if norms else 0.0
    rep.argmax = int(np.argmax(norms)) if norms else None
    rep.fits = {"spread": spread, "norms": norms}
    rep.passed = bool(np.isfinite(rep.empirical_sup) and (not positive or spread <= window))
    return rep


def area_l2_ratios(spec: SpectralDecomposition, alpha: float, beta: float, n_inputs: int = 5, seed: int = 0,
                   **kw) -> list:
    """||S f||_2 / ||f||_2 for seeded random inputs."""
    rng = np.random.default_rng(seed)
    grid = spec.grid
    out = []
    for _ in range(n_inputs):
        f = rng.standard_normal(grid.n_points)
        s = area_function(spec, alpha, beta, f, **kw)
        out.append(float(np.linalg.norm(s) / np.linalg.norm(f)))
    return out


# ---------------------------------------------------------------------------
# Carleson functionals
# ---------------------------------------------------------------------------

CARLESON_KINDS = ("tildeD", "dtbeta", "grad")


@dataclass
class CarlesonResult:
    functional_kind: str
    value: float
    gamma: float
    alpha: float
    beta: float
    kappa: float = 0.0
    achieving_ball: Optional[tuple] = None
    head_error: float = 0.0
    out_of_theory: bool = False
    per_ball: list = field(default_factory=list)


_MULTIPLIER_CACHE: dict = {}


def _multipliers(spec: SpectralDecomposition, kind: str, alpha: float, beta: float, ts: np.ndarray):
    """Spectral multipliers (n_eig, n_t) of the integrand of ``kind``; memoized per spectrum."""
    key = (spec.operator_hash, id(spec), kind, alpha, beta, ts.tobytes())
    if key in _MULTIPLIER_CACHE:
        return _MULTIPLIER_CACHE[key]
    if len(_MULTIPLIER_CACHE) > 64:
        _MULTIPLIER_CACHE.clear()
    mu = spec.power(alpha)
    if kind == "tildeD":
        lam_b = spec.power(beta)
        out = (np.stack([t ** (beta / alpha) * lam_b * np.exp(-t * mu) for t in ts], axis=1),)
    elif kind == "dtbeta":
        fs = FracDerivativeSpec(beta)
        out = (np.stack([t**beta * weyl_magnitude_multiplier(mu, t, fs) for t in ts], axis=1),)
    elif kind == "grad":
        fs = FracDerivativeSpec(1 / (2 * alpha))
        out = (np.exp(-np.outer(mu, ts)), np.stack([weyl_magnitude_multiplier(mu, t, fs) for t in ts], axis=1))
    else:
        raise ValueError(f"unknown Carleson kind {kind!r}")
    _MULTIPLIER_CACHE[key] = out
    return out


def _integrand_fields(spec: SpectralDecomposition, kind: str, alpha: float, beta: float, c: np.ndarray,
                      ts: np.ndarray) -> np.ndarray:
    """|F_t(x)|^2 for every node t (columns), F_t the integrand field of ``kind``."""
    grid = spec.grid
    mults = _multipliers(spec, kind, alpha, beta, ts)
    if kind != "grad":
        return spec.synthesize(mults[0] * c[:, None]) ** 2
    s = ts ** (1 / (2 * alpha))
    u = spec.synthesize(mults[0] * c[:, None])
    gx = gradient(grid, u)  # (n, dim, n_t)
    dt = spec.synthesize(mults[1] * c[:, None])
    return s**2 * ((gx**2).sum(axis=1) + dt**2)


def _small_t_power(kind: str, alpha: float, beta: float) -> float:
    """Exponent p with integrand ~ t^p as t -> 0 (for the head error bar)."""
    return {"tildeD": 2 * beta / alpha, "dtbeta": 2 * beta, "grad": 1 / alpha}[kind]


def carleson_functional(spec: SpectralDecomposition, f: np.ndarray, kind: str, alpha: float, beta: float,
                        gamma: float, family: BallFamily, q: Optional[float] = None, t_floor: float = 1e-4,
                        n_nodes: int = 32, kappa: float = 0.0) -> CarlesonResult:
    """sup_B ( |B|^(-1-2 gamma/n) int_0^{r_B^(2 alpha)} int_B |F_t|^2 dx dt/t )^(1/2).

    F_t is t^(beta/alpha) L^beta e^(-tL^alpha) f (``tildeD``),
    |t^beta d_t^beta e^(-tL^alpha) f| (``dtbeta``) or
    t^(1/(2 alpha)) (grad_x u, d_t^(1/(2 alpha)) u) with u = e^(-tL^alpha) f (``grad``).
    For ``grad`` with a probed exponent q, alpha outside (0, 1/2 - n/(2q)) is
    flagged out-of-theory but still computed.
    """
    grid = spec.grid
    n = grid.dim
    out_of_theory = False
    if kind == "grad" and q is not None and not alpha < 0.5 - n / (2 * q):
        log.warning("gradient functional with alpha=%g outside (0, 1/2 - n/(2q))", alpha)
        out_of_theory = True
    f = np.asarray(f, dtype=float)
    c = spec.coefficients(f)
    radii = sorted({r for _, r in family.balls})
    fields = {}
    for r in radii:
        ts, ws = _log_nodes(t_floor * r ** (2 * alpha), r ** (2 * alpha), n_nodes)
        sq = _integrand_fields(spec, kind, alpha, beta, c, ts)
        fields[r] = (ts, ws, sq)
    p0 = _small_t_power(kind, alpha, beta)
    best, arg, head, per_ball = -1.0, None, 0.0, []
    for ball in family.balls:
        center, r = ball
        mask = family.mask(ball)
        vol = mask.sum() * grid.cell_volume
        ts, ws, sq = fields[r]
        per_t = sq[mask].sum(axis=0) * grid.cell_volume
        integral = float(per_t @ ws)
        head_err = float(per_t[0] / p0)
        val = math.sqrt(max(integral, 0.0) * vol ** (-1 - 2 * gamma / n))
        per_ball.append(val)
        if val > best:
            best, arg = val, ball
            head = math.sqrt(max(integral + head_err, 0.0) * vol ** (-1 - 2 * gamma / n)) - val
    return CarlesonResult(kind, best, gamma, alpha, beta, kappa, arg, head, out_of_theory, per_ball)


def equivalence_table(spec: SpectralDecomposition, functions: dict, alpha: float, beta: float, gamma: float,
                      family: BallFamily, q: Optional[float] = None, kappa: float = 0.0, p: int = 1,
                      **kw) -> list:
    """Campanato norm and the three Carleson functionals per test function, with pairwise ratios.

    With ``kappa > 0`` every entry uses L^kappa f (the Campanato-Sobolev form).
    """
    rows = []
    for fid in sorted(functions):
        f = functions[fid]
        g = spec.apply(spec.power(kappa), f) if kappa > 0 else f
        row = {"function_id": fid, "norm_campanato": campanato_norm(g, gamma, family, p).norm_value}
        for kind in CARLESON_KINDS:
            row[f"carleson_{kind}"] = carleson_functional(spec, g, kind, alpha, beta, gamma, family, q=q,
                                                          kappa=kappa, **kw).value
        keys = ["norm_campanato"] + [f"carleson_{k}" for k in CARLESON_KINDS]
        row["ratios"] = {f"{a}/{b}": row[a] / row[b] for i, a in enumerate(keys) for b in keys[i + 1:]
                         if row[b] > 0}
        rows.append(row)
    return rows


def ratio_band(rows: list) -> tuple:
    vals = [v for row in rows for v in row["ratios"].values()]
    return (min(vals), max(vals)) if vals else (float("nan"), float("nan"))


def campanato_sobolev_norm(spec: SpectralDecomposition, f: np.ndarray, kappa: float, gamma: float,
                           family: BallFamily, alpha: Optional[float] = None, beta: Optional[float] = None,
                           p: int = 1, **kw) -> dict:
    """||L^kappa f|| in the Campanato norm, plus the Carleson variants when alpha, beta are given."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if alpha is not None and not kappa < alpha and kappa > 0:
        raise ValueError("need kappa < alpha")
    g = spec.apply(spec.power(kappa), f) if kappa > 0 else np.asarray(f, dtype=float)
    out = {"norm_campanato": campanato_norm(g, gamma, family, p).norm_value}
    if alpha is not None and beta is not None:
        for kind in CARLESON_KINDS:
            out[f"carleson_{kind}"] = carleson_functional(spec, g, kind, alpha, beta, gamma, family,
                                                          kappa=kappa, **kw).value
        keys = list(out)
        out["ratios"] = {f"{a}/{b}": out[a] / out[b] for i, a in enumerate(keys) for b in keys[i + 1:] if out[b] > 0}
    return out


# ---------------------------------------------------------------------------
# test family
# ---------------------------------------------------------------------------


def periodic_distance_sq(grid: GridSpec, x0) -> np.ndarray:
    """Smooth periodic surrogate of |x - x0|^2: sum (W/pi)^2 sin^2(pi (x - x0)/W)."""
    w = grid.widths
    d = grid.coords() - np.asarray(x0, dtype=float)
    return ((w / np.pi) ** 2 * np.sin(np.pi * d / w) ** 2).sum(axis=1)


def power_bump(grid: GridSpec, x0, gamma: float, eps: float = 0.05) -> np.ndarray:
    """(d(x, x0)^2 + eps^2)^(gamma/2) with the smooth periodic distance."""
    return (periodic_distance_sq(grid, x0) + eps**2) ** (gamma / 2)


def fourier_combo(grid: GridSpec, seed: int = 0, n_modes: int = 3, max_k: int = 2) -> np.ndarray:
    """Seeded combination of low torus Fourier modes (eigenfunctions of the flat Laplacian)."""
    rng = np.random.default_rng(seed)
    x = grid.coords() / grid.widths
    f = np.zeros(grid.n_points)
    for _ in range(n_modes):
        k = rng.integers(-max_k, max_k + 1, size=grid.dim)
        if not k.any():
            k[0] = 1
        f += rng.standard_normal() * np.cos(2 * np.pi * x @ k + rng.uniform(0, 2 * np.pi))
    return f


def raised_cosine(grid: GridSpec, x0, radius: float) -> np.ndarray:
    d = np.sqrt(periodic_distance_sq(grid, x0))
    return np.where(d < radius, 0.5 * (1 + np.cos(np.pi * np.minimum(d / radius, 1))), 0.0)


def carleson_test_family(grid: GridSpec, gamma: float, seed: int = 0) -> dict:
    """Fixed, resolution-independent test functions for the equivalence checks."""
    return {
        "power_bump_a": power_bump(grid, [0.25 * w for w in grid.widths], gamma),
        "power_bump_b": power_bump(grid, [0.5 * w for w in grid.widths], gamma),
        "fourier_combo": fourier_combo(grid, seed),
        "smooth_bump": raised_cosine(grid, [0.5 * w for w in grid.widths], grid.half_width / 2),
    }


# ---------------------------------------------------------------------------
# isometry and Cauchy problem
# ---------------------------------------------------------------------------


def isometry_constant(alpha: float, beta: float) -> float:
    k = 2 * beta / alpha
    return float(2.0 ** (-k) * special.gamma(k))


def isometry_check(spec: SpectralDecomposition, alpha: float, beta: float, f: np.ndarray,
                   n_nodes: int = 256, u_range=(None, 40.0)) -> float:
    """Relative error of int_0^inf ||t^(beta/alpha) L^beta e^(-tL^alpha) f||^2 dt/t against c ||f||^2.

    The kernel component of f is projected out first.  The t-integral is a
    trapezoid rule in log t on nodes covering u = t lambda^alpha from u_lo
    (where the integrand ~ u^(2 beta/alpha) is negligible) to u_hi, for every
    non-zero eigenvalue.
    """
    c = spec.coefficients(np.asarray(f, dtype=float))
    total2 = float(np.dot(c, c))
    c = np.where(spec.zero_mask, 0.0, c)
    norm2 = float(np.dot(c, c))
    # roundoff leaves ~1e-15 relative mass off the kernel; treat that as zero
    if norm2 <= 1e-24 * total2:
        raise ValueError("f lies in the kernel of L")
    k = 2 * beta / alpha
    mu = spec.power(alpha)
    nz = ~spec.zero_mask
    u_lo = u_range[0] if u_range[0] is not None else (1e-13 * k) ** (1 / k)
    t_lo = u_lo / mu[nz].max()
    t_hi = u_range[1] / mu[nz].min()
    ts, ws = _log_nodes(t_lo, t_hi, n_nodes)
    lam_b = spec.power(beta)
    total = 0.0
    c2 = c**2
    for t, w in zip(ts, ws):
        g = t ** (beta / alpha) * lam_b * np.exp(-t * mu)
        total += w * float(np.dot(g**2, c2))
    target = isometry_constant(alpha, beta) * norm2
    return abs(total - target) / target


@dataclass
class CauchyTrajectory:
    times: np.ndarray
    values: np.ndarray
    residuals: np.ndarray


def cauchy_solution(spec: SpectralDecomposition, alpha: float, f: np.ndarray, t_grid: Sequence[float],
                    rel_step: float = 1e-3) -> CauchyTrajectory:
    """u(t) = e^(-t L^alpha) f on t_grid, with residuals of d_t u + L^alpha u = 0.

    Residual at t: ||(u(t+d) - u(t-d))/(2d) + L^alpha u(t)|| / ||L^alpha u(t)||, d = rel_step t.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be positive and ascending")
    c = spec.coefficients(np.asarray(f, dtype=float))
    mu = spec.power(alpha)
    values, res = [], []
    for t in t_grid:
        d = rel_step * t
        u = spec.synthesize(np.exp(-t * mu) * c)
        du = spec.synthesize((np.exp(-(t + d) * mu) - np.exp(-(t - d) * mu)) / (2 * d) * c)
        lu = spec.synthesize(mu * np.exp(-t * mu) * c)
        denom = np.linalg.norm(lu)
        res.append(np.linalg.norm(du + lu) / denom if denom > 0 else 0.0)
        values.append(u)
    return CauchyTrajectory(t_grid, np.array(values), np.array(res))
