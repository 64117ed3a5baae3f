"""
One-sided alpha-stable densities and Bochner subordination.

eta_1^alpha is the density on (0, inf) whose Laplace transform is
exp(-lambda^alpha); eta_t^alpha(s) = t^(-1/alpha) eta_1^alpha(s t^(-1/alpha)).
The fractional semigroup is recovered as

    exp(-t L^alpha) = int_0^inf eta_t^alpha(s) exp(-s L) ds.

Densities come from Kanter's integral form of Zolotarev's representation
(adaptive quadrature on (0, pi)); far in the right tail the convergent
power series in s^(-alpha) takes over.  For alpha = 1/2 the closed form is
available as an independent check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .reports import BoundReport, BoundSpec
from .spectral import KernelSlice, SpectralDecomposition

NORMALIZATION_TOL = 1e-6


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def eta_half_closed_form(u):
    u = np.asarray(u, dtype=float)
    return u**-1.5 * np.exp(-0.25 / u) / (2 * math.sqrt(math.pi))


def _log_kanter(phi, alpha):
    """log A(phi), A(phi) = sin(a phi)^(a/(1-a)) sin((1-a) phi) / sin(phi)^(1/(1-a))."""
    b = 1.0 / (1.0 - alpha)
    return (
        alpha * b * np.log(np.sin(alpha * phi))
        + np.log(np.sin((1 - alpha) * phi))
        - b * np.log(np.sin(phi))
    )


def eta_zolotarev(u: float, alpha: float, epsrel: float = 1e-12) -> float:
    """Unit density at a single point via the Zolotarev-Kanter integral."""
    _check_alpha(alpha)
    if u <= 0:
        return 0.0
    b = 1.0 / (1.0 - alpha)
    log_z = -alpha * b * math.log(u)
    log_pref = math.log(alpha * b / math.pi) - b * math.log(u)
    log_a0 = alpha * b * math.log(alpha) + math.log(1 - alpha)

    def integrand(phi):
        la = _log_kanter(phi, alpha)
        with np.errstate(over="ignore"):
            return math.exp(log_pref + la - math.exp(log_z + la)) if la + log_z < 700 else 0.0

    points = []
    # the integrand A exp(-zA) peaks where z A(phi) = 1
    if -log_z > log_a0:
        lo, hi = 1e-12, math.pi - 1e-15
        f = lambda p: _log_kanter(p, alpha) + log_z
        if f(hi) > 0:
            points.append(optimize.brentq(f, lo, hi, xtol=1e-15))
    total = 0.0
    edges = [0.0] + points + [math.pi]
    for a, c in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, c, epsabs=0.0, epsrel=epsrel, limit=400)
        total += val
    return total


def eta_series(u, alpha: float, max_terms: int = 200):
    """Convergent expansion (1/pi) sum_k (-1)^(k+1) Gamma(k a + 1)/k! sin(k pi a) u^(-k a - 1)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k = np.arange(1, max_terms + 1)
    logmag = special.gammaln(k * alpha + 1) - special.gammaln(k + 1)
    sign = (-1.0) ** (k + 1) * np.sin(k * np.pi * alpha)
    lu = np.log(u)[:, None]
    terms = sign * np.exp(logmag - (k * alpha + 1) * lu)
    return terms.sum(axis=1) / np.pi


def _series_ok(u, alpha):
    return u ** (-alpha) <= 0.2


def eta_unit(u, alpha: float, method: str = "zolotarev"):
    """eta_1^alpha(u), vectorized over u."""
    _check_alpha(alpha)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if method == "closed_form_half":
        if alpha != 0.5:
            raise ValueError("closed_form_half needs alpha = 1/2")
        return eta_half_closed_form(u)
    if method != "zolotarev":
        raise ValueError(f"unknown method {method!r}")
    out = np.empty_like(u)
    big = _series_ok(u, alpha)
    if big.any():
        out[big] = eta_series(u[big], alpha)
    for i in np.nonzero(~big)[0]:
        out[i] = eta_zolotarev(float(u[i]), alpha)
    return out


def eta(alpha: float, t: float, s, method: str = "zolotarev"):
    """eta_t^alpha(s) by the scaling law."""
    _check_alpha(alpha)
    if t <= 0:
        raise ValueError("t must be positive")
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s must be positive")
    scale = t ** (1 / alpha)
    out = eta_unit(np.ravel(s) / scale, alpha, method) / scale
    return out.reshape(s.shape) if s.ndim else float(out[0])


def tail_constant(alpha: float) -> float:
    """lim s^(1+alpha) eta_1^alpha(s) = alpha / Gamma(1 - alpha)."""
    return alpha / math.gamma(1 - alpha)


def stable_negative_moment(alpha: float, gamma: float) -> float:
    """int s^(-gamma) eta_1^alpha(s) ds = Gamma(1 + gamma/alpha) / Gamma(1 + gamma)."""
    return math.gamma(1 + gamma / alpha) / math.gamma(1 + gamma)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StableDensitySpec:
    alpha: float
    method: str = "zolotarev"
    step: float = 0.05
    tail_rel: float = 1e-10

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.method == "closed_form_half" and self.alpha != 0.5:
            raise ValueError("closed_form_half needs alpha = 1/2")


@dataclass
class SubordinationQuadrature:
    """Trapezoid rule in log(u) for int eta_1(u) g(u) du, plus an analytic tail.

    Beyond ``u_max`` the density is replaced by its envelope
    alpha/Gamma(1-alpha) u^(-1-alpha), integrated in closed form.
    """

    alpha: float
    u_nodes: np.ndarray
    weights: np.ndarray
    eta_values: np.ndarray
    u_max: float
    tail_bound_used: float

    @property
    def s_nodes(self):
        return self.u_nodes

    def tail(self, mu):
        """int_{u_max}^inf c u^(-1-alpha) exp(-mu u) du."""
        mu = np.asarray(mu, dtype=float)
        a = self.alpha
        c = tail_constant(a)
        U = self.u_max
        out = np.full(mu.shape, c * U ** (-a) / a)
        pos = mu > 0
        if np.any(pos):
            x = mu[pos] * U
            upper = special.gammaincc(1 - a, x) * math.gamma(1 - a)
            # Gamma(-a, x) = (x^-a e^-x - Gamma(1-a, x)) / a
            g = (x ** (-a) * np.exp(-x) - upper) / a
            out[pos] = c * mu[pos] ** a * g
        return out

    def laplace(self, mu):
        """int eta_1(u) exp(-mu u) du for each mu >= 0."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        we = self.weights * self.eta_values
        out = np.empty(mu.shape)
        chunk = 2048
        for i in range(0, mu.size, chunk):
            m = mu.ravel()[i:i + chunk]
            out.ravel()[i:i + chunk] = np.exp(-np.outer(m, self.u_nodes)) @ we
        return out + self.tail(mu)

    def moment(self, gamma: float) -> float:
        """int u^(-gamma) eta_1(u) du (quadrature plus envelope tail)."""
        a = self.alpha
        body = float(np.sum(self.weights * self.eta_values * self.u_nodes ** (-gamma)))
        return body + tail_constant(a) * self.u_max ** (-a - gamma) / (a + gamma)

    def normalization(self) -> float:
        return float(self.laplace([0.0])[0])


def _u_range(alpha: float, tail_rel: float):
    b = 1.0 / (1.0 - alpha)
    c_small = (1 - alpha) * alpha ** (alpha * b)
    u_lo = (c_small / 45.0) ** (1.0 / (alpha * b))
    # envelope error beyond u_max is O(u_max^(-2 alpha)) in mass
    u_hi = tail_rel ** (-1.0 / (2 * alpha))
    return u_lo, u_hi


@lru_cache(maxsize=32)
def _build_quadrature(alpha: float, method: str, step: float, tail_rel: float) -> SubordinationQuadrature:
    u_lo, u_hi = _u_range(alpha, tail_rel)
    v = np.arange(math.log(u_lo), math.log(u_hi) + step, step)
    u = np.exp(v)
    w = np.full(u.shape, step) * u
    w[0] *= 0.5
    w[-1] *= 0.5
    vals = eta_unit(u, alpha, method)
    return SubordinationQuadrature(alpha, u, w, vals, float(u[-1]), tail_constant(alpha) * float(u[-1]) ** (-alpha) / alpha)


def subordination_quadrature(spec) -> SubordinationQuadrature:
    if not isinstance(spec, StableDensitySpec):
        spec = StableDensitySpec(float(spec))
    return _build_quadrature(spec.alpha, spec.method, spec.step, spec.tail_rel)


def laplace_errors(alpha: float, lambdas, quad=None):
    q = subordination_quadrature(alpha) if quad is None else quad
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("lambda must be nonnegative")
    approx = q.laplace(lambdas)
    exact = np.exp(-lambdas**alpha)
    return approx, exact


def laplace_check(alpha: float, lambdas, quad=None) -> float:
    """Worst relative error of the quadrature against exp(-lambda^alpha)."""
    approx, exact = laplace_errors(alpha, lambdas, quad)
    return float(np.max(np.abs(approx - exact) / exact))


def verify_eta_properties(alpha: float, tail_cutoff: float = 1e4, gammas=(0.25, 0.5, 1.0)) -> BoundReport:
    q = subordination_quadrature(alpha)
    u, vals = q.u_nodes, q.eta_values
    nonneg = bool(np.all(vals >= 0))
    norm = q.normalization()
    tail = (u >= 1) & (u <= tail_cutoff)
    scaled = vals[tail] * u[tail] ** (1 + alpha)
    upper = float((vals[u >= 1] * u[u >= 1] ** (1 + alpha)).max())
    c_lo, c_hi = float(scaled.min()), float(scaled.max())
    moments = {str(g): q.moment(g) for g in gammas}
    finite = all(np.isfinite(m) for m in moments.values())
    spec = BoundSpec(f"eta_properties_alpha_{alpha}", "eta", shape="eta_1(s) s^(1+alpha) in [c-, c+] for s >= 1")
    passed = nonneg and abs(norm - 1) <= NORMALIZATION_TOL and np.isfinite(upper) and c_lo > 0 and finite
    return BoundReport(
        spec,
        empirical_sup=upper,
        fits={
            "normalization": norm,
            "tail_c_minus": c_lo,
            "tail_c_plus": c_hi,
            "tail_limit": tail_constant(alpha),
            "moments": moments,
        },
        passed=bool(passed),
        details={"nonnegative": nonneg, "n_nodes": int(len(u)), "tail_bound_used": q.tail_bound_used},
    )


def subordination_multiplier(spec: SpectralDecomposition, alpha: float, t: float, quad=None) -> np.ndarray:
    """int eta_t(s) exp(-s lambda) ds evaluated over the spectrum."""
    q = subordination_quadrature(alpha) if quad is None else quad
    norm = q.normalization()
    if abs(norm - 1) > NORMALIZATION_TOL:
        raise ValueError(f"subordination quadrature normalization {norm!r} outside tolerance")
    # the kernel of L is an exact zero, as in the spectral path
    lam = np.where(spec.zero_mask, 0.0, spec.eigenvalues)
    return q.laplace(t ** (1 / alpha) * lam)


def subordinate_kernel(spec: SpectralDecomposition, alpha: float, t: float, y: int, quad=None) -> KernelSlice:
    """Fractional heat column as a mixture of heat columns weighted by eta_t."""
    _check_alpha(alpha)
    if t <= 0:
        raise ValueError("t must be positive")
    g = subordination_multiplier(spec, alpha, t, quad)
    return KernelSlice(spec.column(g, y), spec.grid, y, t=t, alpha=alpha, path="subordination")


def subordinate_apply(spec: SpectralDecomposition, alpha: float, t: float, f, quad=None):
    return spec.apply(subordination_multiplier(spec, alpha, t, quad), f)


def tabulate_eta(path, alphas, s_values) -> None:
    """CSV rows (alpha, s, density) of the unit density."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "s", "density"])
        for a in alphas:
            for s, d in zip(s_values, eta_unit(np.asarray(s_values, dtype=float), a)):
                w.writerow([repr(float(a)), repr(float(s)), repr(float(d))])
