"""Synthetic defocus scenes: clean patterns, defocus maps, and their blurred observations."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .basis import GaussianBasis, build_gcm_basis
from .blur import add_noise, apply_blur
from .estimate import CoefficientCache, check_defocus, estimate_oracle
from .image import read_image

PATTERNS = ("testcard", "checker", "edges", "import")
DEFOCUS_KINDS = ("constant", "ramp", "two-plane", "radial")


def _grid(h: int, w: int):
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    return (v + 0.5) / h, (u + 0.5) / w


def testcard(h: int = 128, w: int = 128) -> np.ndarray:
    """Deterministic RGB chart: bar chirp, ring chirp, tinted checkerboard, gradient with disk and edge."""
    v, u = _grid(h, w)
    top, left = v < 0.5, u < 0.5
    img = np.empty((3, h, w))

    # bars whose period shrinks from 16 to 4 pixels down the quadrant
    period = 16.0 - 12.0 * (v / 0.5)
    bars = 0.5 + 0.4 * np.sign(np.sin(2 * np.pi * u * w / np.maximum(period, 4.0)))
    # rings chirped in radius, converted to a smooth cosine
    r = np.hypot(u - 0.75, v - 0.25) * min(h, w)
    rings = 0.5 + 0.4 * np.cos(0.02 * r * r)
    checker = 0.2 + 0.6 * ((np.floor(u * w / 8) + np.floor(v * h / 8)) % 2)
    grad = 0.15 + 0.7 * u
    disk = np.hypot(u - 0.75, v - 0.75) < 0.12
    edge = (u - 0.5) > (v - 0.5)
    smooth = np.where(disk, 0.9, np.where(edge, grad, 0.6 * grad + 0.05))

    base = np.where(top & left, bars, np.where(top, rings, np.where(left, checker, smooth)))
    tint = [(1.0, 0.9, 0.8), (0.8, 1.0, 0.9), (0.9, 0.8, 1.0)]
    for c in range(3):
        t = np.where(top & left, tint[0][c], np.where(top, tint[1][c], np.where(left, tint[2][c], 1.0)))
        img[c] = np.clip(0.05 + (base - 0.05) * t, 0.0, 1.0)
    return img


def checker(h: int, w: int, square: int = 8) -> np.ndarray:
    i, j = np.mgrid[0:h, 0:w]
    return (0.2 + 0.6 * (((i // square) + (j // square)) % 2))[None].astype(np.float64)


def edges(h: int, w: int) -> np.ndarray:
    """Grayscale steps: a bright rectangle, a dark disk and a diagonal edge on mid gray."""
    v, u = _grid(h, w)
    img = np.full((h, w), 0.5)
    img[(u > 0.1) & (u < 0.45) & (v > 0.1) & (v < 0.45)] = 0.9
    img[np.hypot(u - 0.7, v - 0.3) < 0.15] = 0.1
    img[(u + v > 1.2) & (v > 0.55)] = 0.75
    return img[None]


@dataclass
class SceneSpec:
    """Scene description; sigmas are in full-resolution pixels, ``noise`` on the 0-255 scale."""

    name: str = "scene"
    pattern: str = "testcard"
    path: str | None = None
    defocus: str = "constant"
    sigma: float = 1.0
    sigma_lo: float = 0.0
    sigma_hi: float = 4.0
    sigma_fg: float = 0.0
    sigma_bg: float = 3.0
    sigma_max: float = 3.0
    noise: float = 0.0
    seed: int = 0
    dims: tuple[int, int] = (128, 128)

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}; choose from {PATTERNS}")
        if self.defocus not in DEFOCUS_KINDS:
            raise ValueError(f"unknown defocus kind {self.defocus!r}; choose from {DEFOCUS_KINDS}")
        if self.pattern == "import" and not self.path:
            raise ValueError("pattern=import needs a path")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "SceneSpec":
        """Build from ``key=value`` lines; ``#`` starts a comment, ``dims`` is ``HxW``.

        Giving ``sigma_fg``/``sigma_bg`` without ``defocus`` selects the
        two-plane layout.
        """
        types = {f.name: f.type for f in fields(cls)}
        kw: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            if key == "dims":
                kw[key] = parse_dims(val)
            elif key == "seed":
                kw[key] = int(val)
            elif key in ("name", "pattern", "path", "defocus"):
                kw[key] = val
            else:
                kw[key] = float(val)
        if "defocus" not in kw and ("sigma_fg" in kw or "sigma_bg" in kw):
            kw["defocus"] = "two-plane"
        return cls(**kw)


def parse_dims(text: str) -> tuple[int, int]:
    try:
        h, w = (int(s) for s in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"dims must look like HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise ValueError("dims must be positive")
    return h, w


def make_pattern(spec: SceneSpec, dims=None) -> np.ndarray:
    h, w = spec.dims if dims is None else dims
    if spec.pattern == "testcard":
        return testcard(h, w)
    if spec.pattern == "checker":
        return checker(h, w)
    if spec.pattern == "edges":
        return edges(h, w)
    return read_image(spec.path)


def two_plane_mask(h: int, w: int) -> np.ndarray:
    """Foreground = centered disk of radius a quarter of the smaller side."""
    i, j = np.mgrid[0:h, 0:w]
    return np.hypot(i - (h - 1) / 2, j - (w - 1) / 2) <= min(h, w) / 4


def make_defocus(spec: SceneSpec, h: int, w: int) -> np.ndarray:
    if spec.defocus == "constant":
        return np.full((h, w), float(spec.sigma))
    if spec.defocus == "ramp":
        t = np.linspace(0.0, 1.0, w) if w > 1 else np.zeros(1)
        return np.broadcast_to(spec.sigma_lo + (spec.sigma_hi - spec.sigma_lo) * t, (h, w)).copy()
    if spec.defocus == "two-plane":
        return np.where(two_plane_mask(h, w), spec.sigma_fg, spec.sigma_bg).astype(np.float64)
    i, j = np.mgrid[0:h, 0:w]
    ci, cj = (h - 1) / 2, (w - 1) / 2
    r = np.hypot(i - ci, j - cj)
    return spec.sigma_max * r / max(r.max(), 1e-12)


def synth_scene(spec: SceneSpec, dims=None, basis: GaussianBasis | None = None, mode: str = "replicate", q: float = 0.01, cache: CoefficientCache | None = None):
    """Render ``(clean, blurred, defocus)`` for a scene.

    The defocus map is converted to oracle coefficients, the clean pattern is
    blurred with them and noise of level ``spec.noise`` is added (unclipped).
    """
    basis = basis or build_gcm_basis(21)
    clean = make_pattern(spec, dims)
    h, w = clean.shape[-2:]
    defocus = check_defocus(make_defocus(spec, h, w), basis)
    beta = estimate_oracle(defocus, basis, q, cache)
    blurred = add_noise(apply_blur(clean, beta, basis, mode), spec.noise, spec.seed)
    return clean, blurred, defocus


def default_suite(dims=(128, 128)) -> list[SceneSpec]:
    return [
        SceneSpec(name="constant1", pattern="testcard", defocus="constant", sigma=1.0, dims=dims),
        SceneSpec(name="twoplane03", pattern="testcard", defocus="two-plane", sigma_fg=0.0, sigma_bg=3.0, dims=dims),
        SceneSpec(name="ramp04", pattern="testcard", defocus="ramp", sigma_lo=0.0, sigma_hi=4.0, dims=dims),
    ]
