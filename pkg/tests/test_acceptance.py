"""Acceptance criteria, checked against a full ``subheat verify-all`` run.

One session-scoped run of the CLI (default configuration, shared spectrum
cache) feeds criteria 1-12; criterion 13 repeats the run with three worker
threads and compares the report bytes.  Tolerances are written out here
rather than read back from the configuration, and cheap independent
recomputations sit next to the report lookups where they exist.  Every
test prints one PASS/FAIL line.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate

from conftest import cache_dir
from subheat import cli
from subheat.subordination import eta, eta_half_closed_form, eta_zolotarev

pytestmark = pytest.mark.slow


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify_all")
    code = cli.main(["verify-all", "--output", str(out), "--cache", cache_dir()])
    return out, code


@pytest.fixture(scope="session")
def report(run_dir):
    return json.loads((run_dir[0] / "report.json").read_text())


@pytest.fixture(scope="session")
def reports(report):
    """bound name -> report dict, across all tasks."""
    return {r["bound"]["name"]: r for t in report["tasks"] for r in t["reports"]}


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, f"criterion {n}: {detail}"


def _rate(v) -> float:
    return float("inf") if v == "inf" else float(v)


def test_criterion_01_subordination_identity(reports, capsys):
    lap = reports["laplace_identity"]["fits"]["value"]
    half = reports["closed_form_half"]["fits"]["value"]
    # independent: adaptive quadrature of the density against e^(-s lambda)
    direct = 0.0
    for alpha in (0.3, 0.5, 0.7):
        for lam in (0.0, 0.7, 20.0):
            val, _ = integrate.quad(lambda s: eta(alpha, 1.0, s) * math.exp(-s * lam), 0, np.inf,
                                    epsabs=1e-11, epsrel=1e-10, limit=400)
            direct = max(direct, abs(val - math.exp(-lam**alpha)))
    half_direct = max(abs(eta_zolotarev(u, 0.5) / eta_half_closed_form(u) - 1) for u in (0.05, 0.3, 1.0, 4.0, 40.0))
    ok = lap <= 1e-6 and direct <= 1e-6 and half <= 1e-8 and half_direct <= 1e-8
    verdict(capsys, 1, ok, f"laplace {lap:.2e} (direct {direct:.2e}) <= 1e-6; "
                           f"closed form {half:.2e} (direct {half_direct:.2e}) <= 1e-8")


def test_criterion_02_dual_path(reports, capsys):
    fits = reports["dual_path_kernel"]["fits"]
    pairs = fits["pairs"]
    worst = max(pairs.values())
    ok = len(pairs) == 9 and worst <= 1e-5
    verdict(capsys, 2, ok, f"{len(pairs)} (alpha, t) pairs, max relative gap {worst:.2e} <= 1e-5")


def test_criterion_03_fractional_derivative(reports, capsys):
    fits = reports["weyl_quadrature"]["fits"]
    betas = sorted({k.split(",")[0] for k in fits["per_case"]})
    ok = (fits["alpha"] == 0.5 and betas == ["beta=0.5", "beta=1.5"]
          and fits["value"] <= 1e-4 and fits["integer_beta_error"] <= 1e-9)
    verdict(capsys, 3, ok, f"quadrature {fits['value']:.2e} <= 1e-4 over {betas}; "
                           f"beta=1 path {fits['integer_beta_error']:.2e} <= 1e-9")


def test_criterion_04_conservation_domination(reports, capsys):
    rep = reports["conservation_domination"]
    f = rep["fits"]
    times = rep["details"]["times"]
    ok = (times == [0.01, 0.1, 1.0] and f["row_sum_error"] <= 1e-10
          and f["relative_negativity"] <= 1e-12 and f["relative_excess"] <= 1e-12)
    verdict(capsys, 4, ok, f"row sums {f['row_sum_error']:.2e} <= 1e-10; negativity {f['relative_negativity']:.1e}, "
                           f"excess over h_t {f['relative_excess']:.1e} <= 1e-12")


def test_criterion_05_duhamel(reports, report, capsys):
    f = reports["duhamel"]["fits"]
    ok = (report["config"]["duhamel_potential"]["kind"] == "cosine" and f["t"] == 0.2
          and f["value"] <= 1e-6 and f["scalar_residual"] <= 1e-8)
    verdict(capsys, 5, ok, f"residual {f['value']:.2e} <= 1e-6; scalar {f['scalar_residual']:.2e} <= 1e-8")


def test_criterion_06_isometry(reports, spec8_free, capsys):
    worst = reports["isometry"]["fits"]["value"]
    # independent: physical-space applications on a V = 0 torus, constant from math.gamma
    spec = spec8_free
    rng = np.random.default_rng(11)
    f = rng.standard_normal(spec.n)
    K = spec.eigenvectors[:, spec.zero_mask]
    f -= K @ (K.T @ f)
    direct = 0.0
    for alpha, beta in ((0.3, 0.5), (0.5, 1.5), (0.7, 0.5)):
        k = 2 * beta / alpha
        mu = spec.power(alpha)[~spec.zero_mask]
        logt = np.linspace(math.log(1e-6 / mu.max()), math.log(60.0 / mu.min()), 256)
        lam_b = spec.power(beta)
        vals = [np.sum(spec.apply(math.exp(lt * beta / alpha) * lam_b * np.exp(-math.exp(lt) * spec.power(alpha)),
                                  f) ** 2) for lt in logt]
        c = 2.0 ** (-k) * math.gamma(k)
        direct = max(direct, abs(np.trapezoid(vals, logt) / (c * np.sum(f**2)) - 1))
    ok = worst <= 1e-5 and direct <= 1e-5
    verdict(capsys, 6, ok, f"report {worst:.2e}, direct {direct:.2e} <= 1e-5")


GAUSSIAN_FAMILY = ("heat_gaussian", "q1_gaussian", "heat_holder", "q1_holder", "heat_gradient",
                   "heat_gradient_lipschitz")


def test_criterion_07_gaussian_envelopes(reports, capsys):
    rows = []
    ok = True
    for name in GAUSSIAN_FAMILY:
        rep = reports[name]
        sup, ratio = rep["empirical_sup"], rep["refinement_ratio"]
        good = ratio is not None and math.isfinite(sup) and 0.5 <= ratio <= 2.0
        ok &= good
        rows.append(f"{name} {ratio if ratio is None else round(ratio, 3)}")
    rate = reports["gaussian_rate"]["fits"]["fitted_rate"]
    ok &= 1 / 1.5 <= rate / 0.25 <= 1.5
    verdict(capsys, 7, ok, f"refinement ratios in [0.5, 2]: {', '.join(rows)}; rate {rate:.4f} vs 1/4")


def test_criterion_08_polynomial_exponents(reports, capsys):
    n, a, b = 3, 0.5, 0.5
    expected = {"frac_heat_decay": -(n + 2 * a), "D_beta_decay": -(n + 2 * a * b),
                "tilde_D_decay": -(n + 2 * b), "grad_frac_decay": -(n + 2 * a)}
    rows, ok = [], True
    for name, target in expected.items():
        slope = reports[name]["fits"]["decay_slope"]
        good = abs(slope - target) <= 0.3
        ok &= good
        rows.append(f"{name} {slope:.2f} vs {target:.1f}{'' if good else ' (out)'}")
    verdict(capsys, 8, ok, "; ".join(rows))


def test_criterion_09_weighted_lp(reports, capsys):
    spreads = {}
    for name, rep in reports.items():
        if name.startswith("weighted_lp_aw"):
            for p in (1, 2, 4):
                for kind in ("heat", "q1", "grad"):
                    prods = rep["details"]["products"][f"{kind}_p{p}"]
                    spreads[f"{name}/{kind}_p{p}"] = max(prods) / min(prods)
                    assert len(prods) == 3
    mass = reports["lp_mass_v0"]["fits"]["value"]
    worst = max(spreads.values())
    ok = bool(spreads) and worst <= 4.0 and mass <= 1e-10
    verdict(capsys, 9, ok, f"{len(spreads)} products, worst max/min {worst:.3f} <= 4; p=1 mass error {mass:.1e}")


def test_criterion_10_cancellation_rates(reports, capsys):
    groups = {"Q_1": reports["q1_cancellation"]["details"]["rates"]}
    for name in ("D_beta_decay", "tilde_D_decay", "grad_frac_decay"):
        groups[name] = reports[name]["details"]["cancellation_rates"]
    mins = {k: min(_rate(v) for v in rates.values()) for k, rates in groups.items()}
    ok = all(v > 0 for v in mins.values()) and all(len(r) == 3 for r in groups.values())
    verdict(capsys, 10, ok, "minimum fitted rates " + ", ".join(f"{k} {v:.3f}" for k, v in mins.items()))


def test_criterion_11_area_function(reports, capsys):
    atoms = reports["atom_area"]
    norms = atoms["fits"]["norms"]
    spread = max(norms) / min(norms)
    l2 = reports["area_l2"]["fits"]["value"]
    ok = (len(norms) == 9 and all(math.isfinite(x) and x > 0 for x in norms)
          and spread <= 8.0 and l2 <= 3.0)
    verdict(capsys, 11, ok, f"9-atom max/min {spread:.3f} <= 8; L2 ratio spread {l2:.3f} <= 3")


def test_criterion_12_carleson_equivalence(reports, capsys):
    rep = reports["carleson_equivalence"]
    ratios = [r for row in rep["details"]["rows"] for r in row["ratios"].values()]
    fine = rep["fits"]["fine_band"]
    lo, hi = min(ratios), max(ratios)
    drift = rep["fits"]["band_drift"]
    ok = (0.1 <= lo and hi <= 10.0 and 0.1 <= fine[0] and fine[1] <= 10.0
          and drift <= 0.5)
    verdict(capsys, 12, ok, f"ratios in [{lo:.3f}, {hi:.3f}] within [0.1, 10]; "
                            f"24^3 band [{fine[0]:.3f}, {fine[1]:.3f}], drift {drift:.3f} <= 0.5")


def test_criterion_13_determinism(run_dir, tmp_path, capsys):
    first, _ = run_dir
    second = tmp_path / "again"
    cli.main(["verify-all", "--output", str(second), "--cache", cache_dir(), "--jobs", "3"])
    a, b = (first / "report.json").read_bytes(), (second / "report.json").read_bytes()
    verdict(capsys, 13, a == b, f"report.json identical across runs ({len(a)} bytes, jobs 1 vs 3)")
