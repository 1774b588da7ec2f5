"""Coefficient maps from known blur: defocus-map oracle and sampled PSF fields."""

from __future__ import annotations

import numpy as np

from .basis import GaussianBasis, fit_psf, fit_psfs, true_gaussian
from .blur import CoefficientMaps
from .image import downsample2
from .multiscale import ScaleCoefficients
from .solver import derive_gamma


class CoefficientCache:
    """Memo of simplex coefficient vectors keyed by quantized sigma.

    Not thread-safe for writes: fill it (``prefill``) before sharing.
    """

    def __init__(self, basis: GaussianBasis, q: float = 0.01, tol: float = 1e-10, max_iter: int = 20000):
        if q <= 0:
            raise ValueError("quantization step q must be > 0")
        self.basis, self.q, self.tol, self.max_iter = basis, q, tol, max_iter
        self._memo: dict[int, tuple[np.ndarray, float]] = {}

    def key(self, sigma: float) -> int:
        return int(np.floor(sigma / self.q + 0.5))

    def _store(self, n: int, coefficients: np.ndarray, residual: float) -> None:
        self._memo[n] = (coefficients / coefficients.sum(), residual)

    def lookup(self, n: int) -> tuple[np.ndarray, float]:
        if n not in self._memo:
            self.prefill([n])
        return self._memo[n]

    def __call__(self, sigma: float) -> np.ndarray:
        return self.lookup(self.key(sigma))[0]

    def residual(self, sigma: float) -> float:
        return self.lookup(self.key(sigma))[1]

    def prefill(self, keys) -> None:
        """Fit every missing key in one batched NNLS run."""
        todo = sorted({int(n) for n in keys} - self._memo.keys())
        if 0 in todo:
            dirac = np.zeros(self.basis.K)
            dirac[0] = 1.0
            self._store(0, dirac, 0.0)
            todo.remove(0)
        targets = [true_gaussian(n * self.q, cap=self.basis.max_size) for n in todo]
        for n, fit in zip(todo, fit_psfs(targets, self.basis, self.tol, self.max_iter)):
            self._store(n, fit.coefficients, fit.residual)


def check_defocus(defocus: np.ndarray, basis: GaussianBasis) -> np.ndarray:
    d = np.asarray(defocus, dtype=np.float64)
    if d.ndim == 3 and d.shape[0] == 1:
        d = d[0]
    if d.ndim != 2:
        raise ValueError(f"defocus map must be (H, W), got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("defocus map contains non-finite values")
    lo, hi = float(d.min()), float(d.max())
    if lo < -1e-9 or hi > basis.sigma_max + 1e-9:
        raise ValueError(f"defocus sigma range [{lo:.6g}, {hi:.6g}] is outside the basis range [0, {basis.sigma_max}]")
    return np.clip(d, 0.0, basis.sigma_max)


def estimate_oracle(defocus, basis: GaussianBasis, q: float = 0.01, cache: CoefficientCache | None = None) -> CoefficientMaps:
    """Coefficient maps from a ground-truth per-pixel sigma map.

    Every distinct quantized sigma is fitted once: the Gaussian of that sigma
    on its +-3 sigma support (capped at the basis size) is projected onto the
    basis by NNLS and normalized to sum 1.
    """
    d = check_defocus(defocus, basis)
    cache = cache or CoefficientCache(basis, q)
    keys = np.floor(d / cache.q + 0.5).astype(np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    cache.prefill(uniq)
    table = np.stack([cache.lookup(int(n))[0] for n in uniq])  # (U, K)
    planes = table[inv.reshape(d.shape)].transpose(2, 0, 1)
    return CoefficientMaps.from_simplex(planes, basis)


def _bilinear_weights(sites: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # clamp-to-edge linear interpolation from sample sites onto 0..n-1
    sites = np.asarray(sites, dtype=np.float64)
    if len(sites) == 1:
        z = np.zeros(n, dtype=np.intp)
        return z, z, np.zeros(n)
    pos = np.clip(np.arange(n, dtype=np.float64), sites[0], sites[-1])
    hi = np.clip(np.searchsorted(sites, pos, side="right"), 1, len(sites) - 1)
    lo = hi - 1
    frac = (pos - sites[lo]) / (sites[hi] - sites[lo])
    return lo, hi, frac


def estimate_from_psf_field(psfs, rows, cols, shape, basis: GaussianBasis, tol: float = 1e-10, max_iter: int = 20000) -> CoefficientMaps:
    """Coefficient maps from PSFs sampled on a regular grid of sites.

    ``psfs[i][j]`` is the kernel observed at pixel ``(rows[i], cols[j])``.
    Each kernel is fitted by NNLS; the coefficient vectors are bilinearly
    interpolated to every pixel (clamped beyond the outermost sites) and
    renormalized. Identical kernels are fitted once.
    """
    rows, cols = np.asarray(rows, dtype=np.float64), np.asarray(cols, dtype=np.float64)
    if len(rows) == 0 or len(cols) == 0:
        raise ValueError("PSF sample grid is empty")
    if np.any(np.diff(rows) <= 0) or np.any(np.diff(cols) <= 0):
        raise ValueError("sample sites must be strictly increasing")
    h, w = shape
    memo: dict[bytes, np.ndarray] = {}
    grid = np.empty((len(rows), len(cols), basis.K))
    for i in range(len(rows)):
        for j in range(len(cols)):
            k = np.asarray(psfs[i][j], dtype=np.float64)
            key = k.tobytes() + bytes(str(k.shape), "ascii")
            if key not in memo:
                c = fit_psf(k, basis, tol, max_iter).coefficients
                memo[key] = c / c.sum()
            grid[i, j] = memo[key]
    r0, r1, fr = _bilinear_weights(rows, h)
    c0, c1, fc = _bilinear_weights(cols, w)
    top = grid[r0] * (1 - fr)[:, None, None] + grid[r1] * fr[:, None, None]  # (h, gc, K)
    full = top[:, c0] * (1 - fc)[None, :, None] + top[:, c1] * fc[None, :, None]  # (h, w, K)
    return CoefficientMaps.from_simplex(full.transpose(2, 0, 1), basis)


def scale_coefficients_from_defocus(defocus, basis: GaussianBasis, scales: int, q: float = 0.01, rescale_sigma: bool = False) -> ScaleCoefficients:
    """Per-level coefficients estimated directly from a defocus map.

    The map is 2x-averaged to each pyramid level. With ``rescale_sigma`` the
    sigma at level ``t`` is divided by ``2**(T - t)`` (blur measured in that
    level's pixels) before fitting; otherwise the full-resolution sigmas are kept.
    """
    d = check_defocus(defocus, basis)
    levels = [d]
    for _ in range(scales - 1):
        levels.append(downsample2(levels[-1]))
    levels = levels[::-1]
    cache = CoefficientCache(basis, q)
    betas = []
    for t, dt in enumerate(levels, start=1):
        if rescale_sigma:
            dt = dt / 2 ** (scales - t)
        betas.append(estimate_oracle(dt, basis, q, cache))
    return ScaleCoefficients([derive_gamma(b) for b in betas], betas)

