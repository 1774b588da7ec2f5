"""Single-scale fixed-point deblurring and contraction analysis.

With ``gamma_1 = 1 - beta_1`` and ``gamma_k = -beta_k`` the update
``x <- y + x - B x`` becomes ``x <- y + sum_k gamma_k . (g_k * x)``; the
all-in-focus case is ``gamma == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import GaussianBasis
from .blur import CoefficientMaps, GammaMaps, _check, apply_blur, apply_blur_adjoint, mix_responses
from .image import as_image


@dataclass(frozen=True)
class StopRule:
    max_iter: int = 3
    rel_change_tol: float = 1e-5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be >= 0")


@dataclass
class IterationTrace:
    """Per-step diagnostics.

    ``residual_norms[t]`` is ``||y - B x^(t)||`` for the iterate entering
    step ``t``; since one step adds exactly that residual, it is also the
    size of the update.
    """

    residual_norms: list[float] = field(default_factory=list)
    rel_changes: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None
    converged: bool = False

    @property
    def iterations_run(self) -> int:
        return len(self.residual_norms)


def derive_gamma(beta: CoefficientMaps) -> GammaMaps:
    g = -beta.planes
    g[0] = 1.0 - beta.planes[0]
    return GammaMaps(g, beta.basis_name)


def fixed_point_step(x, y, gamma: GammaMaps, basis: GaussianBasis, mode: str = "replicate", omega=None) -> np.ndarray:
    """One update ``y + sum_k omega_k gamma_k . (g_k * x)``.

    ``omega`` optionally rescales each basis term (length ``K``).
    """
    x = as_image(x)
    y = as_image(y)
    if x.shape != y.shape:
        raise ValueError(f"iterate {x.shape} and observation {y.shape} differ")
    _check(x, gamma, basis)
    w = gamma.planes
    if omega is not None:
        omega = np.asarray(omega, dtype=np.float64)
        if omega.shape != (basis.K,):
            raise ValueError(f"omega must have length {basis.K}")
        w = omega[:, None, None] * w
    return y + mix_responses(x, w, basis, mode)


def solve_single_scale(
    y,
    gamma: GammaMaps,
    basis: GaussianBasis,
    mode: str = "replicate",
    stop: StopRule = StopRule(),
    x0=None,
    omega=None,
    keep_iterates: bool = False,
) -> tuple[np.ndarray, IterationTrace]:
    """Iterate from ``x0`` (default ``y``) until ``stop`` triggers.

    Runs at most ``stop.max_iter`` steps and ends early once the relative
    change between consecutive iterates drops below ``stop.rel_change_tol``.
    Non-convergence is reported through the trace, never raised.
    """
    y = as_image(y)
    x = y if x0 is None else as_image(x0)
    trace = IterationTrace(iterates=[] if keep_iterates else None)
    for _ in range(stop.max_iter):
        x_new = fixed_point_step(x, y, gamma, basis, mode, omega)
        step = float(np.linalg.norm(x_new - x))
        denom = float(np.linalg.norm(x_new))
        rel = step / denom if denom > 0 else (0.0 if step == 0 else np.inf)
        trace.residual_norms.append(step)
        trace.rel_changes.append(rel)
        x = x_new
        if keep_iterates:
            trace.iterates.append(x)
        if rel < stop.rel_change_tol:
            trace.converged = True
            break
    return x, trace


def operator_norm(beta: CoefficientMaps, basis: GaussianBasis, mode: str = "replicate", dims=None, iters: int = 100, seed: int = 0, history: bool = False):
    """Power-iteration estimate of ``||I - B||_2``.

    Iterates on ``(I - B)^T (I - B)`` from a seeded Gaussian start and returns
    the square root of the last Rayleigh quotient, a lower bound that
    increases towards the norm. ``dims`` defaults to the coefficient map size;
    1x1 maps are broadcast to ``dims`` as a uniform blur. With
    ``history=True`` the per-iteration estimates are returned as well.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    h, w = beta.shape if dims is None else dims
    if beta.shape != (h, w):
        if beta.shape != (1, 1):
            raise ValueError(f"coefficient maps are {beta.shape}, not {h}x{w}")
        beta = CoefficientMaps(np.broadcast_to(beta.planes, (beta.K, h, w)).copy(), beta.basis_name, beta.simplex)

    def normal_op(v):
        r = v - apply_blur(v, beta, basis, mode)
        return r - apply_blur_adjoint(r, beta, basis, mode)

    rng = np.random.default_rng(seed)
    v = rng.standard_normal((1, h, w))
    while not np.any(v):
        v = rng.standard_normal((1, h, w))
    v /= np.linalg.norm(v)
    est = []
    q = 0.0
    for _ in range(iters):
        u = normal_op(v)
        q = max(float(np.vdot(v, u)), 0.0)
        est.append(np.sqrt(q))
        nu = np.linalg.norm(u)
        if nu == 0:
            break
        v = u / nu
    return (est[-1], est) if history else est[-1]
