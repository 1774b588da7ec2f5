"""PSNR and SSIM on [0, 1] images."""

from __future__ import annotations

import numpy as np

from .basis import gaussian_taps_1d
from .image import as_image

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b):
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, data_range: float = 1.0) -> float:
    """Mean over channels of ``10 log10(range^2 / MSE)``, each capped at 100 dB."""
    a, b = _pair(a, b)
    vals = []
    for ca, cb in zip(a, b):
        mse = float(np.mean((ca - cb) ** 2))
        vals.append(PSNR_CAP if mse == 0 else min(PSNR_CAP, 10.0 * np.log10(data_range**2 / mse)))
    return float(np.mean(vals))


def _valid_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation over the last two axes
    m = len(taps)
    h, w = x.shape[-2:]
    rows = sum(t * x[..., :, j : j + w - m + 1] for j, t in enumerate(taps))
    return sum(t * rows[..., i : i + h - m + 1, :] for i, t in enumerate(taps))


def ssim_map(a, b, data_range: float = 1.0) -> np.ndarray:
    """Per-window SSIM, shape ``(C, H-10, W-10)`` for the 11x11 Gaussian window."""
    a, b = _pair(a, b)
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    g = gaussian_taps_1d(SSIM_WINDOW, SSIM_SIGMA)
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_a, mu_b = _valid_filter(a, g), _valid_filter(b, g)
    saa = _valid_filter(a * a, g) - mu_a * mu_a
    sbb = _valid_filter(b * b, g) - mu_b * mu_b
    sab = _valid_filter(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2)
    return num / den


def ssim(a, b, data_range: float = 1.0) -> float:
    """Gaussian-windowed SSIM (11x11, sigma 1.5, K1=0.01, K2=0.03), averaged over windows and channels."""
    return float(np.mean(ssim_map(a, b, data_range)))


def laplacian_energy(img) -> float:
    """Sum of squared 5-point Laplacian responses over the interior."""
    x = as_image(img)
    lap = x[..., 1:-1, :-2] + x[..., 1:-1, 2:] + x[..., :-2, 1:-1] + x[..., 2:, 1:-1] - 4 * x[..., 1:-1, 1:-1]
    return float(np.sum(lap * lap))
