import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbq import spectral as sp
from bbq.checks import random_real
from bbq.errors import ConfigError, DataError, InvariantError, ParameterError
from bbq.spectral import GridSpec, RealField, SpectralField, VectorField

GRID = GridSpec(32)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def cos_x1(grid, k=1):
    x1, _ = grid.coordinates()
    return RealField(grid, np.cos(k * grid.kappa * x1))


def random_vector(grid, rng):
    return VectorField((random_real(grid, rng), random_real(grid, rng)))


# grid --------------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 12, 100, 7.0, True])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ConfigError):
        GridSpec(n)


def test_grid_rejects_nonpositive_length():
    with pytest.raises(ConfigError):
        GridSpec(16, 0.0)


def test_grid_derived_quantities():
    g = GridSpec(128)
    assert g.dx == pytest.approx(2 * math.pi / 128)
    assert g.kappa == pytest.approx(1.0)
    assert g.nyquist == pytest.approx(64.0)
    assert g.dealias_kmax == 42
    assert g.dealias_cutoff == pytest.approx(128 / 3)


def test_derivative_symbols_zero_nyquist():
    wn = sp.wavenumbers(GRID)
    assert wn.d1[GRID.n // 2, 0] == 0.0
    assert wn.d2[0, GRID.n // 2] == 0.0
    assert wn.inv_d_sq[0, 0] == 0.0


# transforms --------------------------------------------------------------


def test_constant_field_has_only_mean():
    c = sp.forward_transform(RealField(GRID, np.full((32, 32), 2.5))).coeffs.copy()
    assert c[0, 0] == pytest.approx(2.5)
    c[0, 0] = 0
    assert np.max(np.abs(c)) < 1e-15


def test_single_harmonic_coefficients():
    c = sp.forward_transform(cos_x1(GRID)).coeffs.copy()
    assert c[1, 0] == pytest.approx(0.5)
    assert c[-1, 0] == pytest.approx(0.5)
    c[1, 0] = c[-1, 0] = 0
    assert np.max(np.abs(c)) < 1e-15


def test_inverse_of_single_pair_is_cosine():
    c = np.zeros((32, 32), complex)
    c[1, 0] = c[-1, 0] = 0.5
    f = sp.inverse_transform(SpectralField(GRID, c)).samples
    assert np.max(np.abs(f - cos_x1(GRID).samples)) < 1e-14


def test_inverse_of_zero_is_zero():
    assert not np.any(sp.inverse_transform(SpectralField.zeros(GRID)).samples)


def test_roundtrip_hundred_trials():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal((32, 32))
        back = sp.inverse_transform(sp.forward_transform(RealField(GRID, x))).samples
        assert np.max(np.abs(back - x)) < 1e-12 * np.max(np.abs(x))


def test_non_finite_samples_rejected():
    x = np.zeros((32, 32))
    x[3, 4] = np.nan
    with pytest.raises(DataError):
        RealField(GRID, x)


def test_non_hermitian_coefficients_rejected():
    c = np.zeros((32, 32), complex)
    c[1, 0] = 1.0
    with pytest.raises(InvariantError):
        sp.inverse_transform(SpectralField(GRID, c))


def test_half_layout_matches_full():
    rng = np.random.default_rng(1)
    f = random_real(GRID, rng)
    assert np.allclose(sp.half_to_full(f.half, 32), f.coeffs, atol=1e-16)
    assert np.allclose(sp.to_physical(f.half, 32), sp.inverse_transform(f).samples, atol=1e-14)


# differential operators --------------------------------------------------


def test_gradient_of_cosine():
    g = sp.gradient(sp.forward_transform(cos_x1(GRID)))
    x1, _ = GRID.coordinates()
    g1 = sp.inverse_transform(g.components[0]).samples
    g2 = sp.inverse_transform(g.components[1]).samples
    assert np.max(np.abs(g1 + GRID.kappa * np.sin(GRID.kappa * x1))) < 1e-13
    assert np.max(np.abs(g2)) < 1e-15


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_perp_gradient_is_divergence_free(seed):
    f = random_real(GRID, np.random.default_rng(seed))
    v = sp.perp_gradient(f)
    assert v.divergence_free
    assert np.max(np.abs(sp.divergence(v).coeffs)) < 1e-15 * np.max(np.abs(v.stacked))


def test_curl_of_perp_gradient_is_laplacian():
    _, x2 = GRID.coordinates()
    f = sp.forward_transform(RealField(GRID, np.cos(GRID.kappa * x2)))
    lhs = sp.curl(sp.perp_gradient(f)).coeffs
    assert np.max(np.abs(lhs - sp.laplacian(f).coeffs)) < 1e-15
    assert lhs[0, 1] == pytest.approx(-0.5)


# Leray projection --------------------------------------------------------


def test_leray_annihilates_gradients():
    f = random_real(GRID, np.random.default_rng(2), mean_zero=True)
    assert np.max(np.abs(sp.leray_project(sp.gradient(f)).stacked)) < 1e-12


def test_leray_fixes_divergence_free_fields():
    f = random_real(GRID, np.random.default_rng(3))
    v = sp.perp_gradient(f)
    assert np.max(np.abs(sp.leray_project(v).stacked - v.stacked)) < 1e-16


def test_leray_of_longitudinal_cosine_vanishes():
    c = sp.forward_transform(cos_x1(GRID)).coeffs
    v = VectorField.from_array(GRID, np.stack([c, np.zeros_like(c)]))
    assert np.max(np.abs(sp.leray_project(v).stacked)) < 1e-15


def test_leray_keeps_mean():
    c = np.zeros((2, 32, 32), complex)
    c[:, 0, 0] = (1.0, -2.0)
    out = sp.leray_project(VectorField.from_array(GRID, c)).stacked
    assert tuple(out[:, 0, 0].real) == (1.0, -2.0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_leray_idempotent_and_certified(seed):
    v = random_vector(GRID, np.random.default_rng(seed))
    pv = sp.leray_project(v)
    scale = np.max(np.abs(v.stacked))
    assert np.max(np.abs(sp.leray_project(pv).stacked - pv.stacked)) < 1e-12 * scale
    assert np.max(np.abs(sp.divergence(pv).coeffs)) < 1e-12 * scale


def test_divergence_free_flag_is_verified():
    c = sp.forward_transform(cos_x1(GRID)).coeffs
    with pytest.raises(InvariantError):
        VectorField.from_array(GRID, np.stack([c, np.zeros_like(c)]), divergence_free=True)


# truncation --------------------------------------------------------------


def test_truncate_above_nyquist_is_identity():
    f = random_real(GRID, np.random.default_rng(4))
    assert np.array_equal(sp.fourier_truncate(f, 10 * GRID.nyquist).coeffs, f.coeffs)


def test_truncate_removes_single_high_mode():
    c = np.zeros((32, 32), complex)
    c[5, 0] = c[-5, 0] = 0.5
    f = SpectralField(GRID, c)
    assert not np.any(sp.fourier_truncate(f, 4.5).coeffs)


def test_truncate_mixed_field_bit_exact():
    x1, _ = GRID.coordinates()
    f = sp.forward_transform(RealField(GRID, np.cos(x1) + 0.3 * np.cos(7 * x1)))
    t = sp.fourier_truncate(f, 3.0).coeffs
    assert t[1, 0] == f.coeffs[1, 0] and t[-1, 0] == f.coeffs[-1, 0]
    assert t[7, 0] == 0 and t[-7, 0] == 0


def test_truncate_rejects_nonpositive_radius():
    with pytest.raises(ParameterError):
        sp.fourier_truncate(SpectralField.zeros(GRID), 0.0)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(min_value=0.5, max_value=20.0), st.sampled_from([0.0, 1.0, 2.0]))
def test_truncate_idempotent_contraction(seed, N, s):
    f = random_real(GRID, np.random.default_rng(seed))
    jf = sp.fourier_truncate(f, N)
    assert np.array_equal(sp.fourier_truncate(jf, N).coeffs, jf.coeffs)
    assert sp.hs_norm(jf, s) <= sp.hs_norm(f, s) * (1 + 1e-15)


def test_dealias_square():
    g = GridSpec(16)
    f = random_real(g, np.random.default_rng(5), decay=0.0)
    kept = sp.dealias(f).coeffs
    wn = sp.wavenumbers(g)
    assert not np.any(kept[~wn.dealias])
    assert np.array_equal(kept[wn.dealias], f.coeffs[wn.dealias])


# norms -------------------------------------------------------------------


@pytest.mark.parametrize("q", [1.0, 2.0, 3.0, 4.0, math.inf])
def test_lq_of_constant(q):
    c = -1.7
    expect = abs(c) if math.isinf(q) else abs(c) * GRID.domain_length ** (2 / q)
    assert sp.lq_norm(RealField(GRID, np.full((32, 32), c)), q) == pytest.approx(expect, rel=1e-13)


def test_l2_of_cosine():
    L = GRID.domain_length
    assert sp.lq_norm(cos_x1(GRID), 2) == pytest.approx(L / math.sqrt(2), rel=1e-13)
    assert sp.l2_norm(sp.forward_transform(cos_x1(GRID))) == pytest.approx(L / math.sqrt(2))


def test_lq_rejects_small_exponent():
    with pytest.raises(ParameterError):
        sp.lq_norm(cos_x1(GRID), 0.5)


def test_vector_lq_uses_euclidean_magnitude():
    a = RealField(GRID, np.full((32, 32), 3.0))
    b = RealField(GRID, np.full((32, 32), 4.0))
    assert sp.lq_norm((a, b), math.inf) == pytest.approx(5.0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_hs_zero_is_parseval(seed):
    f = random_real(GRID, np.random.default_rng(seed), decay=0.0)
    samples = sp.inverse_transform(f).samples
    assert sp.hs_norm(f, 0.0) == pytest.approx(sp.lq_from_samples(samples, GRID, 2), rel=1e-12)


def test_hs_of_single_mode():
    f = sp.forward_transform(cos_x1(GRID, 3))
    L = GRID.domain_length
    assert sp.hs_norm(f, 2.0) == pytest.approx(10.0 * L / math.sqrt(2), rel=1e-13)
    assert sp.homogeneous_hs_norm(f, 1.0) == pytest.approx(3.0 * L / math.sqrt(2), rel=1e-13)


def test_fields_are_immutable():
    f = random_real(GRID, np.random.default_rng(6))
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 1.0


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        SpectralField.zeros(GRID) + SpectralField.zeros(GridSpec(16))
