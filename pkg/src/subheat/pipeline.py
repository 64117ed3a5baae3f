"""
Task pipelines behind the command line.

A ``Lab`` builds grids, operators, spectra and potential profiles for one
RunConfig on demand and memoizes them (spectra also go to the disk cache).
Each task function takes a Lab and returns a ``TaskResult``: a list of
BoundReports plus the tables, slices and grid functions it wants written.
Tasks never touch the filesystem themselves; the CLI writes their shards.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import estimates as est
from . import fractional as frac
from . import spaces
from . import subordination as sub
from .config import RunConfig
from .grid import (
    GridSpec,
    assemble_operator,
    check_conditions,
    identity_coefficient,
    make_coefficient,
    make_potential,
)
from .potential import build_profile, fit_rho_growth, verify_rho_comparability
from .reports import BoundReport, BoundSpec
from .spectral import SpectralDecomposition, decompose, gradient

log = logging.getLogger(__name__)

LEVELS = ("main", "fine")


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class TaskResult:
    name: str
    reports: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # relative path -> (header, rows)
    grid_functions: dict = field(default_factory=dict)  # relative path -> (values, grid, meta)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def failing(self) -> list:
        return [r.name for r in self.reports if not r.passed]

    def report(self, name: str) -> BoundReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"task": self.name, "passed": self.passed, "reports": [r.to_json() for r in self.reports],
                "notes": list(self.notes)}


def check(name: str, kind: str, value: float, tol: float, shape: str = "", upper: bool = True,
          **fits) -> BoundReport:
    """Scalar tolerance check as a BoundReport (``value <= tol``, or ``>= tol`` with upper=False)."""
    rep = BoundReport(BoundSpec(name, kind, shape=shape, N_list=(0,)))
    value = float(value)
    rep.empirical_sup = value
    rep.fits = {"value": value, "tolerance": float(tol), **fits}
    ok = value <= tol if upper else value >= tol
    rep.passed = bool(np.isfinite(value) and ok)
    return rep


def _guarded(result: TaskResult, name: str, fn: Callable, *args, **kw):
    """Run one check; an exception becomes a failed report carrying the message."""
    try:
        out = fn(*args, **kw)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s failed: %s", name, exc)
        rep = BoundReport(BoundSpec(name, "error"), passed=False, details={"error": f"{type(exc).__name__}: {exc}"})
        result.reports.append(rep)
        return None
    if isinstance(out, BoundReport):
        result.reports.append(out)
    elif isinstance(out, list):
        result.reports.extend(r for r in out if isinstance(r, BoundReport))
    return out


# ---------------------------------------------------------------------------
# lab: lazily built numerical objects
# ---------------------------------------------------------------------------


class Lab:
    """Grids, operators, spectra and profiles for one configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._memo: dict = {}
        self._locks: dict = {}
        self._guard = threading.Lock()

    def _get(self, key, build):
        with self._guard:
            if key in self._memo:
                return self._memo[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._memo:
                self._memo[key] = build()
            return self._memo[key]

    @property
    def refinement_enabled(self) -> bool:
        return bool(self.cfg.data.get("refinement", {}).get("enabled", False))

    def levels(self) -> tuple:
        return LEVELS if self.refinement_enabled else LEVELS[:1]

    def grid(self, level: str = "main") -> GridSpec:
        def build():
            g = self.cfg["grid"]
            if level == "main":
                return GridSpec(g["dim"], g["sizes"], g["spacing"], max_points=g.get("max_points", 8192))
            if level == "fine":
                r = self.cfg["refinement"]
                widths = [n * h for n, h in zip(g["sizes"], g["spacing"])]
                return GridSpec(g["dim"], r["sizes"], [w / n for w, n in zip(widths, r["sizes"])],
                                max_points=r.get("max_points", 8192))
            raise ValueError(f"unknown level {level!r}")

        return self._get(("grid", level), build)

    def _section_params(self, section: str) -> tuple:
        sec = self.cfg[section]
        params = dict(sec.get("params") or {})
        if sec["kind"] in ("fourier_series", "random"):
            params.setdefault("seed", int(sec.get("seed", self.cfg.seed)))
        return sec["kind"], params

    def coefficient(self, level: str = "main", which: str = "config"):
        def build():
            grid = self.grid(level)
            if which == "identity":
                return identity_coefficient(grid)
            if which == "positivity":
                sec = self.cfg.data.get("positivity_coefficient", {"kind": "diagonal_cosine", "params": {}})
                return make_coefficient(grid, sec["kind"], **(sec.get("params") or {}))
            kind, params = self._section_params("coefficient")
            return make_coefficient(grid, kind, **params)

        return self._get(("coeff", level, which), build)

    def potential(self, level: str = "main", which: str = "config") -> np.ndarray:
        def build():
            grid = self.grid(level)
            if which == "zero":
                return np.zeros(grid.n_points)
            kind, params = self._section_params("potential" if which == "config" else "duhamel_potential")
            return make_potential(grid, kind, **params)

        return self._get(("pot", level, which), build)

    def operator(self, level: str = "main", coeff: str = "config", pot: str = "config"):
        return self._get(("op", level, coeff, pot), lambda: assemble_operator(
            self.grid(level), self.coefficient(level, coeff), self.potential(level, pot)))

    def spectrum(self, level: str = "main", coeff: str = "config", pot: str = "config") -> SpectralDecomposition:
        return self._get(("spec", level, coeff, pot),
                         lambda: decompose(self.operator(level, coeff, pot), self.cfg.cache_dir))

    def profile(self, level: str = "main"):
        return self._get(("profile", level), lambda: build_profile(self.potential(level), self.grid(level)))

    def points(self, level: str, positions) -> list:
        g = self.grid(level)
        return [g.nearest_index(p) for p in positions]

    def gaussian_rate(self) -> tuple:
        """(envelope rate, fits): half the smallest fitted V = 0 rate for the configured A."""
        def build():
            sw = self.cfg["sweeps"]
            rate, fits = est.fit_gaussian_rate(self.spectrum("main", "config", "zero"), sw["gauss_t"])
            return 0.5 * rate, fits

        return self._get(("gauss_rate",), build)


# ---------------------------------------------------------------------------
# assemble
# ---------------------------------------------------------------------------


def task_assemble(lab: Lab) -> TaskResult:
    res = TaskResult("assemble")
    for level in lab.levels():
        _guarded(res, f"operator_structure_{level}", _operator_structure, lab, level)
    grid = lab.grid("main")
    prof = lab.profile("main")
    _guarded(res, "rho_comparability", verify_rho_comparability, prof)
    _guarded(res, "rho_growth", fit_rho_growth, prof, lab.points("main", lab.cfg["sweeps"]["probes"]))
    coeff = lab.coefficient("main")
    res.grid_functions["grid_functions/potential.f8"] = (lab.potential("main"), grid, {"kind": "potential"})
    res.grid_functions["grid_functions/coefficient.f8"] = (coeff.values, grid, {"kind": "coefficient"})
    res.grid_functions["grid_functions/critical_radius.f8"] = (prof.rho, grid, {"kind": "rho"})
    return res


def _operator_structure(lab: Lab, level: str) -> BoundReport:
    op = lab.operator(level)
    m = op.matrix
    scale = float(abs(m).max())
    sym = float(abs(m - m.T).max()) / scale
    op0 = lab.operator(level, "config", "zero")
    ones = np.ones(op.grid.n_points)
    null_res = float(np.abs(op0.matrix @ ones).max()) / scale
    coo = m.tocoo()
    off = coo.data[coo.row != coo.col]
    conds = check_conditions(op.coefficient, op.grid)
    rep = check(f"operator_structure_{level}", "operator", max(sym, null_res), 1e-12,
                shape="max(|M - M^T|, |M_0 1|) / max|M|", symmetry=sym, constants_residual=null_res,
                positive_offdiagonals=int((off > 0).sum()))
    rep.details = {"operator_hash": op.operator_hash(), "A1": conds["A1"], "A2": conds["A2"],
                   "A3": {"periodic_ok": conds["A3"].periodic_ok,
                          "divergence_residual": conds["A3"].divergence_residual},
                   "z_matrix": bool((off <= 0).all())}
    rep.passed = bool(rep.passed and conds["A1"]["pass"] and conds["A3"].periodic_ok)
    return rep


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def task_spectrum(lab: Lab) -> TaskResult:
    res = TaskResult("spectrum")
    for level in lab.levels():
        _guarded(res, f"eigenpairs_{level}", _eigen_check, lab, level)
    spec = lab.spectrum("main")
    res.tables["tables/eigenvalues_main.csv"] = (["index", "eigenvalue"],
                                                 [(i, float(v)) for i, v in enumerate(spec.eigenvalues)])
    return res


def _eigen_check(lab: Lab, level: str, n_sample: int = 64) -> BoundReport:
    """Residual |M q - lambda q| and orthonormality on an evenly spaced subset of eigenpairs."""
    spec = lab.spectrum(level)
    op = lab.operator(level)
    idx = np.unique(np.linspace(0, spec.n - 1, min(n_sample, spec.n)).astype(int))
    q = spec.eigenvectors[:, idx]
    resid = float(np.abs(op.matrix @ q - q * spec.eigenvalues[idx]).max()) / max(spec.lam_max, 1.0)
    gram = float(np.abs(q.T @ q - np.eye(len(idx))).max())
    rep = check(f"eigenpairs_{level}", "spectrum", max(resid, gram), 1e-10,
                shape="max(|Mq - lambda q|/lambda_max, |Q^T Q - I|) on sampled pairs",
                residual=resid, orthonormality=gram, lambda_min=float(spec.eigenvalues[0]),
                lambda_max=spec.lam_max, raw_min=spec.raw_min)
    rep.details = {"operator_hash": spec.operator_hash, "n": spec.n, "sampled": len(idx)}
    return rep


# ---------------------------------------------------------------------------
# subordination
# ---------------------------------------------------------------------------


def laplace_nodes(lam_max: float = 20.0, count: int = 33) -> np.ndarray:
    """Zero, log-spaced nodes below 1 and linear nodes up to lam_max (count in total)."""
    n_log = (count - 1) // 2
    n_lin = count - 1 - n_log
    return np.concatenate([[0.0], np.geomspace(1e-3, 1.0, n_log, endpoint=False),
                           np.linspace(1.0, lam_max, n_lin)])


def task_subordination(lab: Lab) -> TaskResult:
    res = TaskResult("verify-subordination")
    cfg = lab.cfg
    fr, sw, tol = cfg["fractional"], cfg["sweeps"], cfg.tol
    lam = laplace_nodes(sw["laplace_lambda_max"], sw["laplace_nodes"])
    _guarded(res, "laplace_identity", _laplace_identity, fr["alpha_list"], lam, tol["laplace"])
    _guarded(res, "closed_form_half", _closed_form_half, tol["closed_form"])
    for a in fr["alpha_list"]:
        _guarded(res, f"eta_properties_alpha_{a}", sub.verify_eta_properties, a)
    _guarded(res, "dual_path_kernel", _dual_path, lab, fr["alpha_list"], sw["dual_path_t"], tol["dual_path"])
    s_values = np.geomspace(1e-2, 1e2, 41)
    res.tables["tables/eta.csv"] = (["alpha", "s", "density"],
                                    [(float(a), float(s), float(d)) for a in fr["alpha_list"]
                                     for s, d in zip(s_values, sub.eta_unit(s_values, a))])
    return res


def _laplace_identity(alphas, lam, tol) -> BoundReport:
    worst, per_alpha = 0.0, {}
    for a in alphas:
        approx, exact = sub.laplace_errors(a, lam)
        err = float(np.abs(approx - exact).max())
        per_alpha[str(a)] = err
        worst = max(worst, err)
    return check("laplace_identity", "eta", worst, tol, shape="|int eta_1(s) e^(-s lam) ds - e^(-lam^alpha)|",
                 per_alpha=per_alpha, n_lambda=len(lam))


def _closed_form_half(tol) -> BoundReport:
    u = np.geomspace(1e-2, 1e3, 41)
    closed = sub.eta_unit(u, 0.5, "closed_form_half")
    zol = np.array([sub.eta_zolotarev(float(x), 0.5) for x in u])
    keep = closed > 1e-300
    rel = float(np.max(np.abs(zol[keep] - closed[keep]) / closed[keep]))
    return check("closed_form_half", "eta", rel, tol, shape="relative |eta_zolotarev - eta_closed| at alpha=1/2")


def _dual_path(lab: Lab, alphas, times, tol) -> BoundReport:
    spec = lab.spectrum("main")
    ys = est.default_sources(spec.grid)
    worst, per_pair = 0.0, {}
    for a in alphas:
        quad = sub.subordination_quadrature(a)
        for t in times:
            g_sub = sub.subordination_multiplier(spec, a, t, quad)
            g_spec = np.exp(-t * spec.power(a))
            c1, c2 = spec.columns(g_sub, ys), spec.columns(g_spec, ys)
            err = float((np.abs(c1 - c2).max(axis=0) / np.abs(c2).max(axis=0)).max())
            per_pair[f"alpha={a},t={t}"] = err
            worst = max(worst, err)
    return check("dual_path_kernel", "frac_heat", worst, tol,
                 shape="max |K_sub - K_spec| / max |K_spec| per column", pairs=per_pair)


# ---------------------------------------------------------------------------
# alpha = 1 kernel bounds
# ---------------------------------------------------------------------------


def task_kernel_bounds(lab: Lab) -> TaskResult:
    res = TaskResult("verify-kernel-bounds")
    cfg = lab.cfg
    sw, tol, win = cfg["sweeps"], cfg.tol, cfg.windows
    _guarded(res, "conservation_domination", _conservation_domination, lab, sw["t_list"],
             tol["conservation"], tol["negativity"])
    _guarded(res, "duhamel", _duhamel, lab, sw["duhamel_t"], tol["duhamel"], tol["duhamel_scalar"])
    _guarded(res, "gaussian_rate", _gaussian_rate_check, lab, win["gauss_rate_factor"])
    for rep in gaussian_family(lab):
        res.reports.append(rep)
    for a_w in sw["lp_alpha_w"]:
        _guarded(res, f"weighted_lp_aw{a_w:g}", _weighted_lp, lab, a_w, win["lp_spread"])
    _guarded(res, "lp_mass_v0", _lp_mass, lab, sw["lp_t"], tol["conservation"])
    _guarded(res, "q1_cancellation", _q_cancellation, lab)
    return res


def _kernel_matrix(spec: SpectralDecomposition, t: float) -> np.ndarray:
    q = spec.eigenvectors
    return (q * np.exp(-t * spec.eigenvalues)) @ q.T


def _conservation_domination(lab: Lab, times, tol_sum, tol_neg) -> BoundReport:
    """Row sums of the V = 0 semigroup and 0 <= K_t <= h_t, for a Z-matrix discretization.

    The configured coefficient is also probed; its minimum entry is reported
    but not gated, since a discretization with positive off-diagonal
    entries cannot keep e^(-tM) entrywise nonnegative for small t.
    """
    sum_err, neg, excess, shear_min = 0.0, 0.0, 0.0, {}
    for t in times:
        k = _kernel_matrix(lab.spectrum("main", "positivity", "config"), t)
        h = _kernel_matrix(lab.spectrum("main", "positivity", "zero"), t)
        scale = float(h.max())
        sum_err = max(sum_err, float(np.abs(h.sum(axis=1) - 1).max()))
        neg = max(neg, float(-k.min()) / scale)
        excess = max(excess, float((k - h).max()) / scale)
        h_cfg = _kernel_matrix(lab.spectrum("main", "config", "zero"), t)
        sum_err = max(sum_err, float(np.abs(h_cfg.sum(axis=1) - 1).max()))
        shear_min[str(t)] = float(_kernel_matrix(lab.spectrum("main"), t).min() / h_cfg.max())
        del k, h, h_cfg
    rep = check("conservation_domination", "heat", sum_err, tol_sum,
                shape="|sum_y h_t(x, y) - 1|; min K_t >= -tol; K_t - h_t <= tol",
                row_sum_error=sum_err, relative_negativity=neg, relative_excess=excess)
    rep.details = {"configured_coefficient_min_entry": shear_min, "times": list(times)}
    rep.passed = bool(rep.passed and neg <= tol_neg and excess <= tol_neg)
    return rep


def _duhamel(lab: Lab, t, tol, tol_scalar) -> BoundReport:
    spec_v = lab.spectrum("main", "config", "duhamel")
    spec_0 = lab.spectrum("main", "config", "zero")
    V = lab.potential("main", "duhamel")
    resid = frac.verify_duhamel(spec_v, spec_0, V, t, est.default_sources(spec_v.grid), n_nodes=64)
    scalar = max(frac.duhamel_scalar_residual(lam, c, t) for lam in (0.0, 1.0, 10.0, 50.0) for c in (0.5, 1.5, 3.0))
    rep = check("duhamel", "heat", resid, tol, shape="relative |h_t - K_t - int h_s V K_(t-s) ds|",
                scalar_residual=scalar, scalar_tolerance=tol_scalar, t=t)
    rep.passed = bool(rep.passed and scalar <= tol_scalar)
    return rep


def _gaussian_rate_check(lab: Lab, factor) -> BoundReport:
    """Gaussian rate of the flat V = 0 kernel against 1/4."""
    sw = lab.cfg["sweeps"]
    rate, fits = est.fit_gaussian_rate(lab.spectrum("main", "identity", "zero"), sw["gauss_t"])
    dev = max(rate / 0.25, 0.25 / rate) if rate > 0 else math.inf
    rep = check("gaussian_rate", "heat", dev, factor, shape="max(c/(1/4), (1/4)/c) for the flat V=0 kernel",
                fitted_rate=rate, envelope_rate=lab.gaussian_rate()[0])
    rep.details = {"fits": fits}
    return rep


GAUSSIAN_FAMILY = (
    ("heat_gaussian", est.verify_gaussian_bound, {}),
    ("q1_gaussian", est.verify_gaussian_bound, {"kind": "q", "m": 1}),
    ("heat_holder", est.verify_holder, {}),
    ("q1_holder", est.verify_holder, {"kind": "q", "m": 1}),
    ("heat_gradient", est.verify_gradient_bound, {}),
    ("heat_gradient_lipschitz", est.verify_gradient_lipschitz, {}),
)


def gaussian_family(lab: Lab) -> list:
    """Every Gaussian-family report on the main grid, with refinement ratios against the fine grid."""
    sw = lab.cfg["sweeps"]
    lo, hi = lab.cfg.windows["refinement"]
    c = lab.gaussian_rate()[0]
    out = []
    for name, fn, kw in GAUSSIAN_FAMILY:
        try:
            coarse = fn(lab.spectrum("main"), lab.profile("main"), sw["gauss_t"], N_list=sw["N_list"], c=c, **kw)
            if lab.refinement_enabled:
                fine = fn(lab.spectrum("fine"), lab.profile("fine"), sw["gauss_t"], N_list=sw["N_list"], c=c, **kw)
                est.refinement(coarse, fine)
                ratios = coarse.details["refinement"]["ratios"].values()
                ok = all(lo <= r <= hi for r in ratios)
                coarse.details["refinement_ok"] = bool(ok)
                coarse.passed = bool(coarse.passed and ok)
        except ValueError as exc:
            coarse = BoundReport(BoundSpec(name, "error"), passed=False, details={"error": str(exc)})
        out.append(coarse)
    return out


def _weighted_lp(lab: Lab, alpha_w, window) -> BoundReport:
    sw = lab.cfg["sweeps"]
    spec = lab.spectrum("main")
    y = lab.points("main", [sw["probes"][-1]])[0]
    rep = est.verify_lp_weighted(spec, y, sw["p_list"], alpha_w, sw["lp_t"], c=lab.gaussian_rate()[0], window=window)
    rep.bound.name = f"weighted_lp_aw{alpha_w:g}"
    return rep


def _lp_mass(lab: Lab, times, tol) -> BoundReport:
    """||h_t(., y)||_1 = 1 exactly for the V = 0 semigroup (p = 1, no weight)."""
    spec0 = lab.spectrum("main", "positivity", "zero")
    grid = spec0.grid
    ys = est.default_sources(grid)
    err = 0.0
    for t in times:
        cols = spec0.columns(lambda lam: np.exp(-t * lam), ys)
        err = max(err, float(np.abs(np.abs(cols).sum(axis=0) * grid.cell_volume - 1).max()))
    return check("lp_mass_v0", "heat", err, tol, shape="| ||h_t(., y)||_1 - 1 |")


def cancel_times(lab: Lab) -> list:
    lo, hi, n = lab.cfg["sweeps"]["cancel_t"]
    return [float(t) for t in np.geomspace(lo, hi, int(n))]


def _q_cancellation(lab: Lab) -> BoundReport:
    spec = lab.spectrum("main")
    prof = lab.profile("main")
    probes = lab.points("main", lab.cfg["sweeps"]["probes"])
    out = est.q_cancellation(spec, prof, probes, cancel_times(lab))
    rep = check("q1_cancellation", "Q_m", out["min_rate"], 0.0, shape="|int Q_t(x, y) dy| ~ (sqrt t/rho)^rate",
                upper=False)
    rep.passed = bool(rep.passed and out["min_rate"] > 0)
    rep.details = {"rates": out["rates"]}
    return rep


# ---------------------------------------------------------------------------
# fractional kernels
# ---------------------------------------------------------------------------


def task_fractional(lab: Lab) -> TaskResult:
    res = TaskResult("verify-fractional")
    cfg = lab.cfg
    fr, sw, tol, win = cfg["fractional"], cfg["sweeps"], cfg.tol, cfg.windows
    _guarded(res, "weyl_quadrature", _weyl_check, lab, sw["t_list"], fr["beta_list"], tol["weyl"], tol["weyl_exact"])
    a, b = fr["decay_alpha"], fr["decay_beta"]
    spec, prof = lab.spectrum("main"), lab.profile("main")
    g = spec.grid
    t_sweep = [g.spacing[0] ** (2 * a), (2 * g.spacing[0]) ** (2 * a)]
    probes = lab.points("main", sw["probes"])
    reps = _guarded(res, "frac_family", est.verify_frac_family, spec, prof, a, b, t_sweep, sw["t_decay"],
                    cancel_times(lab), probes, N_list=sw["N_list"], slope_tol=win["slope"])
    _guarded(res, "frac_power_quadrature", _frac_power_check, lab, fr["alpha_list"])
    _guarded(res, "poisson_form", _poisson_check, lab)
    _guarded(res, "alpha_one_crosscheck", _alpha_one, lab)
    if reps:
        for kind in est.FRAC_KINDS:
            res.tables[f"tables/decay_{kind}.csv"] = decay_table(spec, kind, a, b, sw["t_decay"])
        res.tables["tables/decay_slopes.csv"] = (
            ["kind", "slope", "expected", "cancellation_rate"],
            [(r.name, r.fits["decay_slope"], r.fits["expected_slope"], r.fits.get("cancellation_rate", float("nan")))
             for r in reps])
        y = g.center_index()
        for kind in est.FRAC_KINDS:
            res.tables[f"slices/{kind}.csv"] = slice_table(spec, kind, a, b, sw["t_decay"], y)
    return res


def _weyl_check(lab: Lab, times, betas, tol, tol_exact, alpha: float = 0.5, floor: float = 1e-250) -> BoundReport:
    """Quadrature magnitude against mu^beta e^(-t mu) over the resolved spectrum, mu = lambda^alpha.

    Eigenvalues whose exact value underflows below ``floor`` carry no
    information and are left out.
    """
    spec = lab.spectrum("main")
    mu = spec.power(alpha)
    mu = mu[mu > 0]
    worst, per = 0.0, {}
    for beta in betas:
        fs = frac.FracDerivativeSpec(beta)
        for t in times:
            q = frac.weyl_magnitude_multiplier(mu, t, fs)
            exact = mu**beta * np.exp(-t * mu)
            keep = exact > floor
            err = float(np.max(np.abs(q[keep] - exact[keep]) / exact[keep]))
            per[f"beta={beta},t={t}"] = err
            worst = max(worst, err)
    exact_err = 0.0
    fs1 = frac.FracDerivativeSpec(1.0)
    for t in times:
        q = frac.weyl_magnitude_multiplier(mu, t, fs1)
        exact = mu * np.exp(-t * mu)
        keep = exact > floor
        exact_err = max(exact_err, float(np.max(np.abs(q[keep] - exact[keep]) / exact[keep])))
    rep = check("weyl_quadrature", "D_beta", worst, tol, shape="relative |quadrature - mu^beta e^(-t mu)|",
                per_case=per, integer_beta_error=exact_err, integer_beta_tolerance=tol_exact, alpha=alpha)
    rep.passed = bool(rep.passed and exact_err <= tol_exact)
    return rep


def _frac_power_check(lab: Lab, alphas) -> BoundReport:
    """Subtracted-semigroup quadrature of L^s f against the spectral power, s = alpha/2."""
    spec = lab.spectrum("main")
    f = np.random.default_rng(lab.cfg.seed).standard_normal(spec.n)
    worst = 0.0
    for a in alphas:
        s = a / 2
        q = frac.frac_power_quadrature(spec, s, a, f)
        ref = spec.apply(spec.power(s), f)
        worst = max(worst, float(np.abs(q - ref).max() / np.abs(ref).max()))
    return check("frac_power_quadrature", "power", worst, 1e-6, shape="relative |C int (e^(-tL^a) - 1) f dt - L^s f|")


def _poisson_check(lab: Lab, alpha_p: float = 0.25) -> BoundReport:
    spec = lab.spectrum("main")
    f = np.random.default_rng(lab.cfg.seed + 1).standard_normal(spec.n)
    _, ratio, spread = frac.frac_power_poisson_form(spec, alpha_p, f)
    return check("poisson_form", "power", abs(spread - 1), 1e-6, shape="spread of (Poisson form)/lambda^a",
                 ratio=ratio, alpha_p=alpha_p)


def _alpha_one(lab: Lab) -> BoundReport:
    sw = lab.cfg["sweeps"]
    out = est.alpha_one_crosscheck(lab.spectrum("main"), lab.profile("main"), sw["gauss_t"], lab.gaussian_rate()[0])
    return check("alpha_one_crosscheck", "frac_heat", out["relative_difference"], 1e-4,
                 shape="|sup(K_alpha) - sup(h)| / sup(h) at alpha -> 1", **out)


def _kind_column(spec: SpectralDecomposition, kind: str, alpha: float, beta: float, t: float, y: int) -> np.ndarray:
    mult, _, _ = est._frac_setup(spec, kind, alpha, beta, t)
    col = spec.column(mult, y)
    if kind == "grad_frac":
        return np.linalg.norm(t ** (1 / (2 * alpha)) * gradient(spec.grid, col), axis=1)
    return np.abs(col)


def decay_table(spec: SpectralDecomposition, kind: str, alpha: float, beta: float, t: float) -> tuple:
    """(log distance, log value, fitted envelope) over the decay window of the centre column."""
    grid = spec.grid
    y = grid.center_index()
    vals = _kind_column(spec, kind, alpha, beta, t, y)
    r = grid.distance(y)
    scale = t ** (1 / (2 * alpha))
    sel = (r >= 4 * scale) & (r <= grid.half_width / 2) & (vals > 0)
    lr, lv = np.log(r[sel]), np.log(vals[sel])
    slope, icept = np.polyfit(lr, lv, 1) if sel.sum() >= 2 else (float("nan"), float("nan"))
    order = np.lexsort((lv, lr))
    return (["log_distance", "log_value", "envelope"],
            [(float(lr[i]), float(lv[i]), float(icept + slope * lr[i])) for i in order])


def slice_table(spec: SpectralDecomposition, kind: str, alpha: float, beta: float, t: float, y: int) -> tuple:
    grid = spec.grid
    vals = _kind_column(spec, kind, alpha, beta, t, y)
    r = grid.distance(y)
    rows = []
    for i in range(grid.n_points):
        mi = grid.multi_index(i)
        rows.append((*[int(v) for v in mi], float(r[i]), float(vals[i])))
    header = [f"i{k}" for k in range(grid.dim)] + ["distance", "value"]
    return header, rows


# ---------------------------------------------------------------------------
# function spaces
# ---------------------------------------------------------------------------


def task_carleson(lab: Lab) -> TaskResult:
    res = TaskResult("verify-carleson")
    cfg = lab.cfg
    fr, tol, win = cfg["fractional"], cfg.tol, cfg.windows
    _guarded(res, "isometry", _isometry, lab, fr["alpha_list"], fr["beta_list"], tol["isometry"])
    a, b, gamma = fr["carleson_alpha"], fr["carleson_beta"], fr["gamma"]
    _guarded(res, "atom_area", _atoms, lab, a, b, gamma, win["atom_spread"])
    _guarded(res, "area_l2", _area_l2, lab, a, b, win["area_l2_spread"])
    tables = {}
    _guarded(res, "carleson_equivalence", _equivalence, lab, a, b, gamma, win["equivalence"],
             win["band_stability"], tables)
    res.tables.update(tables)
    _guarded(res, "campanato_sobolev", _campanato_sobolev, lab, a, b, gamma, fr["kappa"], win["equivalence"])
    _guarded(res, "cauchy_residual", _cauchy, lab, fr["alpha_list"])
    return res


def _isometry(lab: Lab, alphas, betas, tol) -> BoundReport:
    spec = lab.spectrum("main")
    f = np.random.default_rng(lab.cfg.seed).standard_normal(spec.n)
    worst, per = 0.0, {}
    for a in alphas:
        for b in betas:
            err = spaces.isometry_check(spec, a, b, f)
            per[f"alpha={a},beta={b}"] = err
            worst = max(worst, err)
    return check("isometry", "tilde_D", worst, tol, shape="|int ||tilde-D_t f||^2 dt/t - c ||f||^2| / (c ||f||^2)",
                 per_case=per)


def atom_family(lab: Lab, gamma: float, level: str = "main") -> list:
    """Nine atoms: three seeded centres times radii rho/4 (mean zero), rho/2 (mean zero), rho (no cancellation).

    Centres are drawn from the grid points whose critical radius admits a
    mean-zero atom on at least seven cells.
    """
    grid = lab.grid(level)
    prof = lab.profile(level)
    rho = prof.rho
    p = grid.dim / (grid.dim + gamma)
    ok = np.nonzero(np.isfinite(rho) & (rho / 4 >= 1.01 * min(grid.spacing)))[0]
    if ok.size < 3:
        raise ValueError("too few points with a resolvable critical radius for atoms")
    rng = np.random.default_rng(lab.cfg.seed)
    centers = sorted(rng.choice(ok, size=3, replace=False).tolist())
    atoms = []
    for j, c in enumerate(centers):
        r = float(min(rho[c], grid.half_width))
        for k, (frac_r, cancel) in enumerate(((0.25, True), (0.5, True), (1.0, False))):
            atoms.append(spaces.generate_atom(prof, c, frac_r * r, p, with_cancellation=cancel,
                                              seed=lab.cfg.seed + 3 * j + k, strict=False))
    return atoms


def _atoms(lab: Lab, a, b, gamma, window) -> BoundReport:
    atoms = atom_family(lab, gamma)
    rep = spaces.atom_area_check(lab.spectrum("main"), a, b, gamma, atoms, window=window)
    rep.details["atoms"] = [{"center": at.center, "radius": at.radius, "mean_zero": at.has_cancellation,
                             "valid": at.valid} for at in atoms]
    rep.passed = bool(rep.passed and all(at.valid for at in atoms))
    return rep


def _area_l2(lab: Lab, a, b, window) -> BoundReport:
    ratios = spaces.area_l2_ratios(lab.spectrum("main"), a, b, n_inputs=5, seed=lab.cfg.seed)
    spread = max(ratios) / min(ratios)
    return check("area_l2", "tilde_D", spread, window, shape="max/min of ||S f||_2 / ||f||_2", ratios=ratios)


def ball_family(lab: Lab, level: str) -> spaces.BallFamily:
    bf = lab.cfg["sweeps"]["ball_family"]
    return spaces.BallFamily.from_positions(lab.grid(level), bf["positions"], bf["radii"], lab.profile(level).rho)


def equivalence_rows(lab: Lab, level: str, a: float, b: float, gamma: float) -> list:
    spec = lab.spectrum(level)
    fns = spaces.carleson_test_family(spec.grid, gamma, lab.cfg.seed)
    return spaces.equivalence_table(spec, fns, a, b, gamma, ball_family(lab, level))


def _equivalence_csv(rows) -> tuple:
    keys = ["norm_campanato"] + [f"carleson_{k}" for k in spaces.CARLESON_KINDS]
    rkeys = sorted(rows[0]["ratios"]) if rows else []
    header = ["function_id"] + keys + rkeys
    return header, [[row["function_id"]] + [row[k] for k in keys] + [row["ratios"].get(k, float("nan")) for k in rkeys]
                    for row in rows]


def _equivalence(lab: Lab, a, b, gamma, window, stability, tables) -> BoundReport:
    rows = equivalence_rows(lab, "main", a, b, gamma)
    lo, hi = spaces.ratio_band(rows)
    tables["tables/equivalence_main.csv"] = _equivalence_csv(rows)
    rep = check("carleson_equivalence", "carleson", max(hi, 1 / lo), window[1],
                shape="pairwise ratios of Campanato and Carleson norms in [1/10, 10]", band=[lo, hi])
    rep.passed = bool(rep.passed and lo >= window[0] and hi <= window[1])
    rep.details = {"rows": rows}
    if lab.refinement_enabled:
        rows_f = equivalence_rows(lab, "fine", a, b, gamma)
        lo_f, hi_f = spaces.ratio_band(rows_f)
        tables["tables/equivalence_fine.csv"] = _equivalence_csv(rows_f)
        drift = max(abs(lo_f / lo - 1), abs(hi_f / hi - 1))
        rep.fits.update({"fine_band": [lo_f, hi_f], "band_drift": drift, "band_stability_tolerance": stability})
        rep.refinement_ratio = float(max(lo_f / lo, hi_f / hi, key=lambda v: abs(math.log(v))))
        rep.details["rows_fine"] = rows_f
        rep.passed = bool(rep.passed and drift <= stability and lo_f >= window[0] and hi_f <= window[1])
    return rep


def _campanato_sobolev(lab: Lab, a, b, gamma, kappa, window) -> BoundReport:
    spec = lab.spectrum("main")
    fam = ball_family(lab, "main")
    f = spaces.carleson_test_family(spec.grid, gamma, lab.cfg.seed)["fourier_combo"]
    out = spaces.campanato_sobolev_norm(spec, f, kappa, gamma, fam, a, b)
    vals = list(out["ratios"].values())
    spread = max(max(vals), 1 / min(vals))
    rep = check("campanato_sobolev", "carleson", spread, window[1], shape="ratios of L^kappa-form norms",
                **{k: v for k, v in out.items() if k != "ratios"})
    rep.details = {"ratios": out["ratios"], "kappa": kappa}
    return rep


def _cauchy(lab: Lab, alphas) -> BoundReport:
    spec = lab.spectrum("main")
    f = spaces.carleson_test_family(spec.grid, 0.25, lab.cfg.seed)["smooth_bump"]
    worst = 0.0
    for a in alphas:
        traj = spaces.cauchy_solution(spec, a, f, [0.01, 0.05, 0.2])
        worst = max(worst, float(traj.residuals.max()))
    return check("cauchy_residual", "frac_heat", worst, 1e-4, shape="||d_t u + L^alpha u|| / ||L^alpha u||")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

TASKS = {
    "assemble": task_assemble,
    "spectrum": task_spectrum,
    "verify-subordination": task_subordination,
    "verify-kernel-bounds": task_kernel_bounds,
    "verify-fractional": task_fractional,
    "verify-carleson": task_carleson,
}

ALL_VERIFY = ("assemble", "spectrum", "verify-subordination", "verify-kernel-bounds", "verify-fractional",
              "verify-carleson")


def run_task(name: str, lab: Lab) -> TaskResult:
    return TASKS[name](lab)



__all__ = ["Lab", "TaskResult", "TASKS", "ALL_VERIFY", "run_task", "check", "gaussian_family",
           "equivalence_rows", "atom_family", "laplace_nodes", "cancel_times"]
