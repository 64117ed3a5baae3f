from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subheat.spectral import frac_heat_column_spectral
from subheat.subordination import (
    StableDensitySpec,
    eta,
    eta_half_closed_form,
    eta_series,
    eta_unit,
    eta_zolotarev,
    laplace_check,
    stable_negative_moment,
    subordinate_kernel,
    subordination_quadrature,
    tabulate_eta,
    verify_eta_properties,
)


def test_half_density_value():
    target = 4 / (math.e * math.sqrt(math.pi))
    assert target == pytest.approx(0.83022, abs=1e-5)
    assert eta(0.5, 1.0, 0.25) == pytest.approx(target, rel=1e-10)
    assert eta(0.5, 1.0, 0.25, method="closed_form_half") == pytest.approx(target, rel=1e-14)


def test_scaling_law():
    a, t, s = 0.7, 2.0, 3.0
    scale = t ** (1 / a)
    assert eta(a, t, s) == pytest.approx(eta_zolotarev(s / scale, a) / scale, rel=1e-12)


def test_zolotarev_matches_closed_form():
    u = np.geomspace(1e-3, 1e3, 61)
    z = np.array([eta_zolotarev(x, 0.5) for x in u])
    c = eta_half_closed_form(u)
    keep = c > 1e-300
    assert np.max(np.abs(z[keep] - c[keep]) / c[keep]) <= 1e-8


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_series_and_integral_agree_in_overlap(alpha):
    u = np.geomspace(0.2 ** (-1 / alpha), 50 * 0.2 ** (-1 / alpha), 12)
    s = eta_series(u, alpha)
    z = np.array([eta_zolotarev(x, alpha) for x in u])
    np.testing.assert_allclose(s, z, rtol=1e-9)


def test_half_tail_constant():
    s = 1e3
    val = s**1.5 * eta_unit(s, 0.5)[0]
    assert val == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=0.05)


def test_normalization_alpha_03():
    assert subordination_quadrature(0.3).normalization() == pytest.approx(1.0, abs=1e-6)
    assert verify_eta_properties(0.3).passed


def test_negative_moment_against_trapezoid_oracle():
    # independent oracle: fine trapezoid in log u of the closed-form density, plus its u^-2 tail
    v = np.arange(math.log(1e-4), math.log(1e12), 1e-3)
    u = np.exp(v)
    g = u**-0.5 * eta_half_closed_form(u) * u
    oracle = float(np.sum((g[1:] + g[:-1]) / 2) * 1e-3) + 1 / (2 * math.sqrt(math.pi)) / u[-1]
    q = subordination_quadrature(0.5)
    assert q.moment(0.5) == pytest.approx(oracle, rel=1e-6)
    assert oracle == pytest.approx(stable_negative_moment(0.5, 0.5), rel=1e-6)


def test_laplace_points():
    assert subordination_quadrature(0.5).laplace([0.0])[0] == pytest.approx(1.0, abs=1e-9)
    assert subordination_quadrature(0.5).laplace([4.0])[0] == pytest.approx(math.exp(-2), rel=1e-8)
    assert math.exp(-2) == pytest.approx(0.135335, abs=1e-6)
    assert laplace_check(0.7, [0.1, 1.0, 10.0]) <= 1e-6


def test_closed_form_quadrature_path():
    q = subordination_quadrature(StableDensitySpec(0.5, method="closed_form_half"))
    assert laplace_check(0.5, [0.0, 1.0, 20.0], q) <= 1e-8
    with pytest.raises(ValueError):
        StableDensitySpec(0.3, method="closed_form_half")


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        eta(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        eta(0.5, -1.0, 1.0)
    with pytest.raises(ValueError):
        eta(0.5, 1.0, -1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("t", [0.05, 0.2, 1.0])
def test_kernel_dual_path(spec8_spike, alpha, t):
    y = 11
    sub = subordinate_kernel(spec8_spike, alpha, t, y).values
    ref = frac_heat_column_spectral(spec8_spike, alpha, t, y).values
    big = np.abs(ref) > 1e-12
    assert np.max(np.abs(sub - ref)[big]) / np.abs(ref).max() <= 1e-5


def test_subordinated_mass(spec8_free):
    for alpha in (0.3, 0.7):
        col = subordinate_kernel(spec8_free, alpha, 0.2, 0).values
        assert col.sum() * spec8_free.grid.cell_volume == pytest.approx(1.0, abs=1e-5)
        assert col.min() >= -1e-10 * col.max()


def test_poisson_kernel(spec8_free):
    for t in (0.05, 0.5):
        sub = subordinate_kernel(spec8_free, 0.5, t, 3).values
        ref = spec8_free.column(lambda lam: np.exp(-t * np.sqrt(lam)), 3)
        assert np.abs(sub - ref).max() <= 1e-5 * np.abs(ref).max()


def test_tabulate(tmp_path):
    p = tmp_path / "eta.csv"
    tabulate_eta(p, [0.5], [0.25, 1.0])
    rows = p.read_text().splitlines()
    assert rows[0] == "alpha,s,density"
    assert float(rows[1].split(",")[2]) == pytest.approx(4 / (math.e * math.sqrt(math.pi)), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(alpha=st.sampled_from([0.3, 0.5, 0.7]), lam=st.floats(0.0, 20.0))
def test_laplace_identity_property(alpha, lam):
    assert laplace_check(alpha, [lam]) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.15, 0.9), u=st.floats(1e-2, 1e3))
def test_density_nonnegative(alpha, u):
    assert eta_unit(u, alpha)[0] >= 0
