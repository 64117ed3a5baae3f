from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subheat.grid import GridSpec, assemble_operator, make_coefficient, make_potential
from subheat.spectral import (
    KernelSlice,
    decompose,
    frac_heat_apply_spectral,
    frac_power_apply,
    gradient_of_slice,
    heat_apply,
    heat_kernel_column,
    load_decomposition,
    q_kernel,
    q_multiplier,
)


def test_eigenpairs(spec8_spike):
    s = spec8_spike
    assert s.gram_error() <= 1e-12
    assert np.all(np.diff(s.eigenvalues) >= 0) and s.eigenvalues[0] >= 0


def test_heat_identity_at_zero(spec8_spike):
    f = np.random.default_rng(0).standard_normal(spec8_spike.n)
    np.testing.assert_array_equal(heat_apply(spec8_spike, 0.0, f), f)
    np.testing.assert_array_equal(frac_heat_apply_spectral(spec8_spike, 0.5, 0.0, f), f)


def test_semigroup_law(spec8_spike):
    f = np.random.default_rng(1).standard_normal(spec8_spike.n)
    a = heat_apply(spec8_spike, 0.03, heat_apply(spec8_spike, 0.05, f))
    b = heat_apply(spec8_spike, 0.08, f)
    assert np.abs(a - b).max() <= 1e-10 * np.abs(b).max()


def test_mass_conservation(spec8_free):
    ones = np.ones(spec8_free.n)
    for t in (0.001, 0.1, 3.0):
        np.testing.assert_allclose(heat_apply(spec8_free, t, ones), 1.0, atol=1e-10)
        np.testing.assert_allclose(frac_heat_apply_spectral(spec8_free, 0.4, t, ones), 1.0, atol=1e-10)
        col = heat_kernel_column(spec8_free, t, 5).values
        assert col.sum() * spec8_free.grid.cell_volume == pytest.approx(1.0, abs=1e-10)


def test_kernel_symmetry(spec8_spike):
    rng = np.random.default_rng(2)
    t = 0.02
    for x, y in rng.integers(0, spec8_spike.n, size=(10, 2)):
        kxy = heat_kernel_column(spec8_spike, t, y).values[x]
        kyx = heat_kernel_column(spec8_spike, t, x).values[y]
        assert kxy == pytest.approx(kyx, rel=1e-10, abs=1e-14)


def test_domination_on_z_matrix(grid8):
    coeff = make_coefficient(grid8, "diagonal_cosine", amplitude=0.3)
    V = make_potential(grid8, "spike", height=30.0, width=0.15, background=2.0)
    sv = decompose(assemble_operator(grid8, coeff, V))
    s0 = decompose(assemble_operator(grid8, coeff))
    for t in (0.01, 0.1, 1.0):
        k = heat_kernel_column(sv, t, 3).values
        h = heat_kernel_column(s0, t, 3).values
        assert k.min() >= -1e-12 * h.max()
        assert (k - h).max() <= 1e-12 * h.max()


def test_q_multiplier_scalar():
    assert q_multiplier(1.0, 1)(np.array([1.0]))[0] == pytest.approx(-np.exp(-1))


def test_q_kernel_central_difference(spec8_spike):
    t, y = 0.05, 7
    eps = 1e-4 * t
    q = q_kernel(spec8_spike, t, 1, y).values
    fd = t * (heat_kernel_column(spec8_spike, t + eps, y).values
              - heat_kernel_column(spec8_spike, t - eps, y).values) / (2 * eps)
    assert np.abs(q - fd).max() <= 1e-6 * np.abs(q).max()


def test_q_kernel_integrates_to_zero(spec8_free):
    q = q_kernel(spec8_free, 0.05, 1, 0).values
    assert abs(q.sum() * spec8_free.grid.cell_volume) <= 1e-10


def test_powers(grid8, spec8_spike):
    op_matrix = None
    f = np.random.default_rng(3).standard_normal(spec8_spike.n)
    coeff = make_coefficient(grid8, "shear", amplitude=0.3, phase=np.pi / 2)
    V = make_potential(grid8, "spike", center=[0.5] * 3, width=0.15, height=30.0, background=2.0)
    op_matrix = assemble_operator(grid8, coeff, V).matrix
    mf = op_matrix @ f
    assert np.abs(frac_power_apply(spec8_spike, 1.0, f) - mf).max() <= 1e-10 * np.abs(mf).max()
    half = frac_power_apply(spec8_spike, 0.5, frac_power_apply(spec8_spike, 0.5, f))
    assert np.abs(half - mf).max() <= 1e-9 * np.abs(mf).max()


def test_powers_annihilate_constants(spec8_free):
    ones = np.ones(spec8_free.n)
    # exact up to roundoff of the eigenvectors' overlap with 1, amplified by lam_max^s
    for s in (0.25, 0.5, 1.0):
        assert np.abs(frac_power_apply(spec8_free, s, ones)).max() <= 1e-14 * spec8_free.lam_max**s


def test_alpha_to_one_limit():
    lam = np.geomspace(0.1, 10, 50)
    for t in (0.1, 1.0):
        a = np.exp(-t * lam ** (1 - 1e-6))
        assert np.abs(a / np.exp(-t * lam) - 1).max() <= 1e-4


def test_gradient_of_constant_and_plane_wave():
    grid = GridSpec.cube(2, 32)
    g, mag = gradient_of_slice(KernelSlice(np.full(grid.n_points, 4.0), grid, 0))
    assert np.all(g == 0)
    x = grid.coords()
    k = np.array([1, 2])
    phase = 2 * np.pi * x @ k
    _, mag = gradient_of_slice(KernelSlice(np.cos(phase), grid, 0))
    exact = 2 * np.pi * np.linalg.norm(k) * np.abs(np.sin(phase))
    h = grid.spacing[0]
    assert np.abs(mag - exact).max() <= (2 * np.pi * 2) ** 3 * h**2


def test_gradient_odd_symmetry(spec8_free, grid8):
    y = grid8.center_index()
    g, _ = gradient_of_slice(heat_kernel_column(spec8_free, 0.01, y))
    disp = grid8.displacement(y)
    # reflect x -> 2y - x; exclude the half-period points that map to themselves
    for i in range(grid8.n_points):
        if np.any(np.isclose(np.abs(disp[i]), grid8.half_width)):
            continue
        j = grid8.nearest_index(grid8.coords()[y] - disp[i])
        np.testing.assert_allclose(g[i], -g[j], atol=1e-8)


def test_cache_round_trip(tmp_path, grid8):
    op = assemble_operator(grid8, make_coefficient(grid8, "diagonal_cosine"), make_potential(grid8, "cosine"))
    s1 = decompose(op, tmp_path)
    s2 = load_decomposition(tmp_path, op.operator_hash(), grid8)
    assert s2 is not None
    np.testing.assert_allclose(s2.eigenvalues, s1.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(s2.eigenvectors, s1.eigenvectors, atol=1e-12)
    s3 = decompose(op, tmp_path)
    np.testing.assert_array_equal(s3.eigenvectors, s1.eigenvectors)


def test_cache_mismatch_rebuilds(tmp_path, grid8):
    op = assemble_operator(grid8, make_coefficient(grid8, "identity"))
    decompose(op, tmp_path)
    bin_path = tmp_path / f"spectrum_{op.operator_hash()}.bin"
    bin_path.write_bytes(bin_path.read_bytes()[:-8])
    assert load_decomposition(tmp_path, op.operator_hash(), grid8) is None
    assert decompose(op, tmp_path).n == grid8.n_points


@settings(max_examples=20, deadline=None)
@given(coefs=st.lists(st.floats(-2, 2), min_size=4, max_size=4), seed=st.integers(0, 1000))
def test_polynomial_calculus(spec8_spike, grid8, coefs, seed):
    coeff = make_coefficient(grid8, "shear", amplitude=0.3, phase=np.pi / 2)
    V = make_potential(grid8, "spike", center=[0.5] * 3, width=0.15, height=30.0, background=2.0)
    m = assemble_operator(grid8, coeff, V).matrix
    f = np.random.default_rng(seed).standard_normal(grid8.n_points)
    direct, p = np.zeros_like(f), f.copy()
    for c in coefs:
        direct += c * p
        p = m @ p
    via = spec8_spike.apply(lambda lam: sum(c * lam**k for k, c in enumerate(coefs)), f)
    scale = sum(abs(c) * spec8_spike.lam_max**k for k, c in enumerate(coefs)) * np.abs(f).max()
    assert np.abs(via - direct).max() <= 1e-9 * max(scale, 1e-300) + 1e-12


@settings(max_examples=25, deadline=None)
@given(t=st.floats(1e-4, 10.0), seed=st.integers(0, 10**6))
def test_contraction(spec8_spike, t, seed):
    f = np.random.default_rng(seed).standard_normal(spec8_spike.n)
    assert np.linalg.norm(heat_apply(spec8_spike, t, f)) <= np.linalg.norm(f) * (1 + 1e-12)
