"""Spatially variant blur operator built from a Gaussian basis.

The operator is the gather form

    (B x)[p] = sum_k beta_k[p] * (g(sigma_k) * x)[p]

so every output pixel mixes the basis responses at that same pixel with its
own coefficient vector. Coefficient maps are shared by all channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import GaussianBasis
from .image import as_image
from .parallel import pmap

BOUNDARY_MODES = ("replicate", "periodic")
_PAD_MODE = {"replicate": "edge", "periodic": "wrap"}


@dataclass
class CoefficientMaps:
    """Per-pixel mixing weights ``beta`` with shape ``(K, H, W)``."""

    planes: np.ndarray
    basis_name: str
    simplex: bool = False

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3:
            raise ValueError(f"coefficient planes must be (K, H, W), got {self.planes.shape}")
        if self.simplex and not is_simplex(self.planes):
            raise ValueError("coefficients flagged simplex are not nonnegative / sum-to-one")

    @property
    def K(self) -> int:
        return self.planes.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes.shape[1:]

    @classmethod
    def one_hot(cls, basis: GaussianBasis, k: int, shape) -> "CoefficientMaps":
        planes = np.zeros((basis.K, *shape))
        planes[k] = 1.0
        return cls(planes, basis.name, simplex=True)

    @classmethod
    def from_simplex(cls, planes, basis: GaussianBasis) -> "CoefficientMaps":
        """Clip negatives, renormalize each pixel to sum 1 and certify."""
        return cls(renormalize(planes), basis.name, simplex=True)


@dataclass
class GammaMaps:
    """Reparametrized coefficients: ``gamma_1 = 1 - beta_1``, ``gamma_k = -beta_k``."""

    planes: np.ndarray
    basis_name: str

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)

    @property
    def K(self) -> int:
        return self.planes.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes.shape[1:]


def is_simplex(planes: np.ndarray, atol: float = 1e-6) -> bool:
    planes = np.asarray(planes)
    return bool(np.all(planes >= -atol) and np.all(np.abs(planes.sum(axis=0) - 1.0) <= atol))


def renormalize(planes: np.ndarray) -> np.ndarray:
    """Project per-pixel weight vectors onto the simplex by clipping and rescaling.

    Pixels whose weights are all zero fall back to the Dirac (in-focus) element.
    """
    p = np.maximum(np.asarray(planes, dtype=np.float64), 0.0)
    s = p.sum(axis=0)
    dead = s <= 0
    if np.any(dead):
        p[0][dead] = 1.0
        s = np.where(dead, 1.0, s)
    return p / s


def _check_mode(mode: str) -> str:
    if mode not in BOUNDARY_MODES:
        raise ValueError(f"boundary mode must be one of {BOUNDARY_MODES}, got {mode!r}")
    return _PAD_MODE[mode]


def _filter_axis(a: np.ndarray, taps: np.ndarray, axis: int, pad_mode: str) -> np.ndarray:
    r = len(taps) // 2
    n = a.shape[axis]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    p = np.pad(a, pad, mode=pad_mode)
    idx = [slice(None)] * a.ndim
    out = np.zeros_like(a)
    # fixed tap order keeps results independent of threading
    for j, w in enumerate(taps):
        idx[axis] = slice(j, j + n)
        out += w * p[tuple(idx)]
    return out


def gaussian_filter(x: np.ndarray, taps: np.ndarray, mode: str = "replicate") -> np.ndarray:
    """Separable filtering of the last two axes with a symmetric 1-D kernel."""
    pad_mode = _check_mode(mode)
    if len(taps) == 1:
        return x.copy() if taps[0] == 1.0 else taps[0] * x
    return _filter_axis(_filter_axis(x, taps, x.ndim - 1, pad_mode), taps, x.ndim - 2, pad_mode)


def filter2d_direct(x: np.ndarray, kernel: np.ndarray, mode: str = "replicate") -> np.ndarray:
    """Direct (non-separable) 2-D correlation; reference path for the separable filter."""
    pad_mode = _check_mode(mode)
    m = kernel.shape[0]
    r = m // 2
    h, w = x.shape[-2:]
    pad = [(0, 0)] * (x.ndim - 2) + [(r, r), (r, r)]
    p = np.pad(x, pad, mode=pad_mode)
    out = np.zeros_like(x, dtype=np.float64)
    for i in range(m):
        for j in range(m):
            out += kernel[i, j] * p[..., i : i + h, j : j + w]
    return out


def _active(planes: np.ndarray) -> list[int]:
    return [k for k in range(planes.shape[0]) if np.any(planes[k])]


def _responses(x: np.ndarray, basis: GaussianBasis, mode: str, ks, separable: bool = True) -> list[np.ndarray]:
    def one(k):
        if separable:
            return gaussian_filter(x, basis.taps_1d[k], mode)
        return filter2d_direct(x, basis.kernels[k], mode)

    return pmap(one, ks)


def basis_responses(x: np.ndarray, basis: GaussianBasis, mode: str = "replicate", separable: bool = True) -> np.ndarray:
    """Filter ``x`` with every basis kernel; returns shape ``(K, C, H, W)``.

    Plane 0 (the Dirac) is a copy of ``x``. ``separable=False`` switches to the
    direct 2-D path, kept as a reference.
    """
    x = as_image(x)
    return np.stack(_responses(x, basis, mode, range(basis.K), separable))


def _check(x: np.ndarray, maps, basis: GaussianBasis) -> None:
    if maps.K != basis.K or maps.basis_name != basis.name:
        raise ValueError(f"coefficients for {maps.basis_name} (K={maps.K}) do not match basis {basis.name} (K={basis.K})")
    if tuple(x.shape[-2:]) != tuple(maps.shape):
        raise ValueError(f"image is {x.shape[-2:]} but coefficient maps are {maps.shape}")


def mix_responses(x: np.ndarray, weights: np.ndarray, basis: GaussianBasis, mode: str) -> np.ndarray:
    """``sum_k weights[k] * (g_k * x)``, skipping planes whose weights are all zero."""
    ks = _active(weights)
    out = np.zeros_like(x)
    for k, z in zip(ks, _responses(x, basis, mode, ks)):
        out += weights[k][None] * z
    return out


def apply_blur(x: np.ndarray, beta: CoefficientMaps, basis: GaussianBasis, mode: str = "replicate") -> np.ndarray:
    """Apply the basis-mixture blur ``B`` to a ``(C, H, W)`` image."""
    x = as_image(x)
    _check(x, beta, basis)
    return mix_responses(x, beta.planes, basis, mode)


def apply_blur_adjoint(y: np.ndarray, beta: CoefficientMaps, basis: GaussianBasis, mode: str = "replicate") -> np.ndarray:
    """``B^T y = sum_k g_k * (beta_k . y)``.

    Exact adjoint of :func:`apply_blur` for ``mode="periodic"``; with replicate
    padding it is the adjoint of the unpadded operator only in the interior.
    """
    y = as_image(y)
    _check(y, beta, basis)
    ks = _active(beta.planes)
    out = np.zeros_like(y)

    def one(k):
        return gaussian_filter(beta.planes[k][None] * y, basis.taps_1d[k], mode)

    for z in pmap(one, ks):
        out += z
    return out


def add_noise(x: np.ndarray, sigma_hat: float, seed: int = 0) -> np.ndarray:
    """Add white Gaussian noise with std ``sigma_hat / 255``; no clipping."""
    if sigma_hat < 0:
        raise ValueError("noise level must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if sigma_hat == 0:
        return x.copy()
    n = np.random.default_rng(seed).standard_normal(x.shape)
    return x + (sigma_hat / 255.0) * n
