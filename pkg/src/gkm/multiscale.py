"""Coarse-to-fine fixed-point deblurring over a 2x image pyramid.

Block ``t`` takes the level-``t`` observation ``y_t`` and the upsampled
result of block ``t-1`` (block 1 starts from ``y_1``), applies ``R``
fixed-point steps with that level's coefficients and emits ``x_t``. The
finest block's output is the restored image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import GaussianBasis
from .blur import CoefficientMaps, GammaMaps, renormalize
from .image import as_image, build_pyramid, downsample2, upsample2
from .solver import IterationTrace, StopRule, derive_gamma, solve_single_scale


@dataclass
class SolverConfig:
    scales: int = 3
    inner_iters: int = 1
    omega: np.ndarray | None = None
    boundary: str = "replicate"
    rel_change_tol: float = 0.0

    def __post_init__(self):
        if self.scales < 1 or self.inner_iters < 1:
            raise ValueError("scales and inner_iters must be >= 1")
        if self.omega is not None:
            self.omega = np.asarray(self.omega, dtype=np.float64)
            if self.omega.ndim != 2 or self.omega.shape[0] != self.scales:
                raise ValueError(f"omega must be (scales, K), got {self.omega.shape}")

    @property
    def stop(self) -> StopRule:
        return StopRule(max_iter=self.inner_iters, rel_change_tol=self.rel_change_tol)


@dataclass
class ScaleCoefficients:
    """Per-level gamma maps, coarsest first."""

    gammas: list[GammaMaps]
    betas: list[CoefficientMaps] = field(default_factory=list, repr=False)

    @property
    def scales(self) -> int:
        return len(self.gammas)


def downsample_coefficients(full: CoefficientMaps, scales: int) -> ScaleCoefficients:
    """Derive per-level coefficients from one full-resolution map.

    Each plane is 2x-averaged down the pyramid, every pixel is renormalized
    onto the simplex and converted to gamma.
    """
    levels = [full.planes]
    for _ in range(scales - 1):
        levels.append(downsample2(levels[-1]))
    betas = [CoefficientMaps(renormalize(p), full.basis_name, simplex=True) for p in levels[::-1]]
    return ScaleCoefficients([derive_gamma(b) for b in betas], betas)


def solve_multiscale(
    y,
    coeffs: ScaleCoefficients,
    basis: GaussianBasis,
    config: SolverConfig = SolverConfig(),
    keep_scales: bool = False,
) -> tuple[np.ndarray, list[IterationTrace]] | tuple[np.ndarray, list[IterationTrace], list[np.ndarray]]:
    """Run the scale-recurrent iteration; returns the finest estimate and per-scale traces.

    With ``keep_scales=True`` the per-level outputs ``x_1..x_T`` are returned too.
    """
    y = as_image(y)
    if coeffs.scales != config.scales:
        raise ValueError(f"got coefficients for {coeffs.scales} scales, config wants {config.scales}")
    pyr = build_pyramid(y, config.scales)
    for t, (y_t, g) in enumerate(zip(pyr, coeffs.gammas), start=1):
        if tuple(g.shape) != y_t.shape[-2:]:
            raise ValueError(f"scale {t}: coefficients are {g.shape}, pyramid level is {y_t.shape[-2:]}")
    traces, outputs = [], []
    x = None
    for t, (y_t, g) in enumerate(zip(pyr, coeffs.gammas)):
        x0 = None if x is None else upsample2(x, *y_t.shape[-2:])
        omega = None if config.omega is None else config.omega[t]
        x, tr = solve_single_scale(y_t, g, basis, config.boundary, config.stop, x0=x0, omega=omega)
        traces.append(tr)
        outputs.append(x)
    if keep_scales:
        return x, traces, outputs
    return x, traces
