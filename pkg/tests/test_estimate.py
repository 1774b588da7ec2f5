import numpy as np
import pytest

from gkm.blur import apply_blur, is_simplex
from gkm.estimate import (
    CoefficientCache,
    check_defocus,
    estimate_from_psf_field,
    estimate_oracle,
    scale_coefficients_from_defocus,
)
from gkm.metrics import psnr
from gkm.solver import StopRule, derive_gamma, solve_single_scale
from gkm.synth import testcard as make_card

# exact NNLS optimum for the sigma=0.6 Gaussian on its 5x5 support, cross-checked
# with an active-set solver; no mixture of this basis gets below it
SIGMA06_RESIDUAL = 0.032522


def test_zero_defocus_is_dirac(basis):
    beta = estimate_oracle(np.zeros((6, 5)), basis)
    assert np.all(beta.planes[0] == 1.0) and beta.simplex
    assert np.all(derive_gamma(beta).planes == 0.0)


def test_basis_sigma_gives_one_hot(basis):
    cache = CoefficientCache(basis)
    beta = estimate_oracle(np.full((4, 4), 0.5), basis, cache=cache)
    k = basis.sigmas.index(0.5)
    np.testing.assert_allclose(beta.planes[k], 1.0, atol=1e-9)
    assert cache.residual(0.5) <= 1e-6


def test_off_grid_sigma_residual_regression(basis):
    cache = CoefficientCache(basis)
    estimate_oracle(np.full((3, 3), 0.6), basis, cache=cache)
    assert cache.residual(0.6) == pytest.approx(SIGMA06_RESIDUAL, abs=1e-4)


@pytest.mark.xfail(strict=True, reason="best attainable residual at sigma=0.6 is 0.0325")
def test_off_grid_sigma_residual_below_one_percent(basis):
    assert CoefficientCache(basis).residual(0.6) <= 1e-2


def test_cache_memoizes_and_rounds_half_up(basis):
    cache = CoefficientCache(basis, q=0.01)
    assert cache.key(0.005) == 1 and cache.key(0.0049) == 0
    a = cache(1.234)
    assert cache(1.2349) is a


def test_out_of_range_sigma_is_error(basis):
    with pytest.raises(ValueError, match="outside"):
        estimate_oracle(np.full((2, 2), 5.5), basis)
    with pytest.raises(ValueError, match="outside"):
        check_defocus(np.full((2, 2), -0.1), basis)
    with pytest.raises(ValueError, match="non-finite"):
        check_defocus(np.full((2, 2), np.nan), basis)


def test_bad_quantization_step(basis):
    with pytest.raises(ValueError):
        CoefficientCache(basis, q=0.0)


def test_quantization_error_shrinks_with_q(basis):
    x = make_card(32, 32)
    d = np.broadcast_to(np.linspace(0.3, 3.3, 32), (32, 32)).copy()
    ref = apply_blur(x, estimate_oracle(d, basis, 0.0005), basis)
    err = [np.abs(apply_blur(x, estimate_oracle(d, basis, q), basis) - ref).max() for q in (0.02, 0.01, 0.002)]
    assert err[0] > err[1] > err[2]
    assert err[1] <= 5e-3


@pytest.mark.xfail(strict=True, reason="nearly collinear basis: coefficients move by up to 0.78 between q=0.01 and q=0.001")
def test_quantization_coefficients_within_1e3(basis):
    d = np.broadcast_to(np.linspace(2.0, 2.2, 48), (4, 48)).copy()
    a = estimate_oracle(d, basis, 0.01).planes
    b = estimate_oracle(d, basis, 0.001).planes
    assert np.abs(a - b).max() <= 1e-3


def test_oracle_maps_are_simplex(basis):
    rng = np.random.default_rng(0)
    beta = estimate_oracle(rng.random((8, 8)) * 5.0, basis)
    assert beta.simplex and is_simplex(beta.planes, atol=1e-12)


def test_psf_field_uniform_basis_element(basis):
    k = basis.sigmas.index(1.0)
    g = basis.kernels[k]
    beta = estimate_from_psf_field([[g, g], [g, g]], [0, 15], [0, 15], (16, 16), basis)
    np.testing.assert_allclose(beta.planes[k], 1.0, atol=1e-9)


def test_psf_field_two_regions(basis):
    dirac = np.ones((1, 1))
    g2 = basis.kernels[basis.sigmas.index(2.0)]
    rows = np.arange(0, 32, 2)
    cols = np.arange(0, 32, 2)
    field = [[dirac if c < 16 else g2 for c in cols] for _ in rows]
    beta = estimate_from_psf_field(field, rows, cols, (32, 32), basis)
    assert beta.simplex
    np.testing.assert_allclose(beta.planes[0][:, :12], 1.0, atol=1e-3)
    np.testing.assert_allclose(beta.planes[basis.sigmas.index(2.0)][:, 18:], 1.0, atol=1e-3)
    # the blend is confined to the sample interval straddling the boundary
    blend = (beta.planes.max(axis=0) < 1 - 1e-3).any(axis=0)
    assert set(np.flatnonzero(blend)) <= {15}


def test_psf_field_random_is_simplex(basis):
    rng = np.random.default_rng(3)
    field = []
    for _ in range(3):
        row = []
        for _ in range(3):
            k = rng.random((5, 5))
            row.append(k / k.sum())
        field.append(row)
    beta = estimate_from_psf_field(field, [0, 5, 11], [1, 6, 9], (12, 12), basis)
    assert is_simplex(beta.planes, atol=1e-9)


def test_psf_field_errors(basis):
    with pytest.raises(ValueError, match="empty"):
        estimate_from_psf_field([], [], [], (4, 4), basis)
    g = basis.kernels[3]
    with pytest.raises(ValueError, match="increasing"):
        estimate_from_psf_field([[g, g]], [0], [3, 1], (4, 4), basis)


def test_round_trip_recovers_two_db(basis):
    clean = make_card(64, 64)
    beta = estimate_oracle(np.full((64, 64), 1.5), basis)
    y = apply_blur(clean, beta, basis, "periodic")
    x, _ = solve_single_scale(y, derive_gamma(beta), basis, "periodic", StopRule(max_iter=50, rel_change_tol=0.0))
    assert psnr(x, clean) >= psnr(y, clean) + 2.0


def test_scale_coefficients_from_defocus(basis):
    d = np.full((20, 18), 2.0)
    plain = scale_coefficients_from_defocus(d, basis, 3)
    assert [g.shape for g in plain.gammas] == [(5, 5), (10, 9), (20, 18)]
    # the oracle fits the +-3 sigma Gaussian, which is wider than the 9-tap basis
    # element at sigma=2, so compare against the oracle vector rather than one-hot
    want = CoefficientCache(basis)
    for b in plain.betas:
        np.testing.assert_allclose(b.planes, np.broadcast_to(want(2.0)[:, None, None], b.planes.shape))
    scaled = scale_coefficients_from_defocus(d, basis, 3, rescale_sigma=True)
    for b, s in zip(scaled.betas, (0.5, 1.0, 2.0)):
        np.testing.assert_allclose(b.planes, np.broadcast_to(want(s)[:, None, None], b.planes.shape))
    np.testing.assert_allclose(scaled.betas[0].planes[basis.sigmas.index(0.5)], 1.0, atol=1e-9)
