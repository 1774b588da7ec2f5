import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkm.basis import gaussian_taps_1d
from gkm.metrics import laplacian_energy, psnr, ssim, ssim_map
from gkm.synth import SceneSpec, default_suite, make_defocus, parse_dims, synth_scene, testcard as make_card, two_plane_mask


def slow_ssim(a, b):
    # window-by-window reference with an explicit 2-D weight matrix
    g = gaussian_taps_1d(11, 1.5)
    w2 = np.outer(g, g)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for ca, cb in zip(a, b):
        h, w = ca.shape
        for i in range(h - 10):
            for j in range(w - 10):
                pa, pb = ca[i : i + 11, j : j + 11], cb[i : i + 11, j : j + 11]
                ma, mb = np.sum(w2 * pa), np.sum(w2 * pb)
                va = np.sum(w2 * (pa - ma) ** 2)
                vb = np.sum(w2 * (pb - mb) ** 2)
                cov = np.sum(w2 * (pa - ma) * (pb - mb))
                vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def slow_psnr(a, b):
    out = []
    for ca, cb in zip(a, b):
        mse = sum((x - y) ** 2 for x, y in zip(ca.ravel(), cb.ravel())) / ca.size
        out.append(100.0 if mse == 0 else min(100.0, 10 * np.log10(1.0 / mse)))
    return sum(out) / len(out)


def test_psnr_identical_is_capped(card):
    assert psnr(card, card) == 100.0


@pytest.mark.parametrize("offset,want", [(0.1, 20.0), (0.01, 40.0)])
def test_psnr_constant_offsets(card, offset, want):
    assert abs(psnr(card, card + offset) - want) <= 1e-9


def test_psnr_shape_mismatch(card):
    with pytest.raises(ValueError, match="differ"):
        psnr(card, card[:, :-1])


def test_ssim_self_is_one(card):
    assert ssim(card, card) == 1.0


def test_ssim_inverted_card_is_low(card):
    assert ssim(card, 1.0 - card) < 0.1


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_ssim_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((2, 2, 16, 18))
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-9


def test_ssim_needs_window_sized_image():
    with pytest.raises(ValueError, match="11x11"):
        ssim_map(np.zeros((1, 10, 20)), np.zeros((1, 10, 20)))


def test_metrics_match_slow_reference():
    rng = np.random.default_rng(42)
    for _ in range(10):
        a = rng.random((2, 14, 16))
        b = np.clip(a + 0.2 * rng.standard_normal(a.shape), 0, 1)
        assert abs(psnr(a, b) - slow_psnr(a, b)) <= 1e-6
        assert abs(ssim(a, b) - slow_ssim(a, b)) <= 1e-6


def test_in_focus_scene_is_unchanged(basis):
    clean, blurred, d = synth_scene(SceneSpec(defocus="constant", sigma=0.0, dims=(48, 40)), basis=basis)
    assert np.array_equal(clean, blurred) and np.all(d == 0)


def test_two_plane_foreground_untouched(basis):
    spec = SceneSpec(defocus="two-plane", sigma_fg=0.0, sigma_bg=3.0, dims=(64, 64))
    clean, blurred, _ = synth_scene(spec, basis=basis)
    fg = two_plane_mask(64, 64)
    assert np.array_equal(blurred[:, fg], clean[:, fg])
    assert not np.allclose(blurred[:, ~fg], clean[:, ~fg])


def test_ramp_lowers_laplacian_energy(basis):
    clean, blurred, _ = synth_scene(SceneSpec(defocus="ramp", sigma_lo=0.0, sigma_hi=4.0, dims=(64, 64)), basis=basis)
    assert laplacian_energy(blurred) < laplacian_energy(clean)


def test_noise_is_seeded(basis):
    spec = SceneSpec(defocus="constant", sigma=1.0, noise=3.0, seed=9, dims=(32, 32))
    a = synth_scene(spec, basis=basis)[1]
    b = synth_scene(spec, basis=basis)[1]
    assert np.array_equal(a, b)


def test_defocus_layouts():
    spec = SceneSpec(defocus="ramp", sigma_lo=1.0, sigma_hi=2.0)
    d = make_defocus(spec, 4, 5)
    np.testing.assert_allclose(d[0], [1.0, 1.25, 1.5, 1.75, 2.0])
    r = make_defocus(SceneSpec(defocus="radial", sigma_max=2.5), 9, 9)
    assert r[4, 4] == 0.0 and r.max() == pytest.approx(2.5)


def test_spec_parsing():
    spec = SceneSpec.parse("# two planes\npattern = checker\nsigma_fg=0.5\nsigma_bg = 2\nnoise=1\nseed=4\ndims=32x48\n")
    assert spec.defocus == "two-plane" and spec.pattern == "checker"
    assert (spec.sigma_fg, spec.sigma_bg, spec.noise, spec.seed, spec.dims) == (0.5, 2.0, 1.0, 4, (32, 48))
    with pytest.raises(ValueError, match="unknown key"):
        SceneSpec.parse("colour=red")
    with pytest.raises(ValueError, match="key=value"):
        SceneSpec.parse("pattern")
    with pytest.raises(ValueError, match="pattern"):
        SceneSpec.parse("pattern=mandelbrot")
    with pytest.raises(ValueError):
        parse_dims("32by32")


def test_out_of_range_scene_is_error(basis):
    with pytest.raises(ValueError, match="outside"):
        synth_scene(SceneSpec(defocus="constant", sigma=6.0, dims=(16, 16)), basis=basis)


def test_default_suite_shape():
    suite = default_suite()
    assert [s.name for s in suite] == ["constant1", "twoplane03", "ramp04"]
    assert all(s.pattern == "testcard" and s.dims == (128, 128) for s in suite)


def test_testcard_is_deterministic_rgb():
    a = make_card(64, 80)
    assert a.shape == (3, 64, 80) and a.min() >= 0 and a.max() <= 1
    assert np.array_equal(a, make_card(64, 80))
