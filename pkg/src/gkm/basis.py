"""Discrete Gaussian kernel basis and PSF fitting onto it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def gaussian_taps_1d(size: int, sigma: float) -> np.ndarray:
    """Normalized 1-D point-sampled Gaussian of odd length ``size``."""
    _check_size(size, sigma)
    if sigma == 0:
        return np.ones(1)
    r = size // 2
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return g / g.sum()


def _check_size(size: int, sigma: float) -> None:
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0 and size != 1:
        raise ValueError("sigma = 0 (Dirac) requires size 1")


def make_gaussian(size: int, sigma: float) -> np.ndarray:
    """Point-sampled isotropic Gaussian on a ``size x size`` grid, summing to 1.

    ``sigma == 0`` gives the 1x1 Dirac kernel ``[[1.0]]``.
    """
    _check_size(size, sigma)
    if sigma == 0:
        return np.ones((1, 1))
    r = size // 2
    i, j = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    g = np.exp(-(i * i + j * j) / (2.0 * sigma * sigma))
    return g / g.sum()


def pillbox(radius: float, size: int | None = None) -> np.ndarray:
    """Normalized disk kernel: unit weight on integer offsets with ``i^2 + j^2 <= radius^2``."""
    r = int(np.ceil(radius))
    size = 2 * r + 1 if size is None else size
    if size % 2 == 0 or size < 2 * int(np.floor(radius)) + 1:
        raise ValueError(f"size {size} cannot hold a disk of radius {radius}")
    h = size // 2
    i, j = np.mgrid[-h : h + 1, -h : h + 1]
    d = (i * i + j * j <= radius * radius).astype(np.float64)
    return d / d.sum()


def pad_to(kernel: np.ndarray, size: int) -> np.ndarray:
    """Zero-pad a centered odd square kernel to ``size x size``."""
    m = kernel.shape[0]
    if kernel.shape != (m, m) or m % 2 == 0:
        raise ValueError(f"kernel must be odd and square, got {kernel.shape}")
    if m > size:
        raise ValueError(f"cannot pad a {m}x{m} kernel to {size}x{size}")
    p = (size - m) // 2
    return np.pad(kernel, p)


@dataclass(frozen=True)
class GaussianBasis:
    """Ascending set of Gaussian kernels; element 0 is the Dirac delta."""

    sigmas: tuple[float, ...]
    sizes: tuple[int, ...]
    kernels: tuple[np.ndarray, ...] = field(repr=False)
    taps_1d: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.sigmas)

    @property
    def max_size(self) -> int:
        return max(self.sizes)

    @property
    def name(self) -> str:
        return f"gcm{self.max_size}"

    @property
    def sigma_max(self) -> float:
        return self.sigmas[-1]

    def padded(self, size: int | None = None) -> np.ndarray:
        """All kernels zero-padded to a common ``size`` (default ``max_size``), shape ``(K, size, size)``."""
        size = self.max_size if size is None else size
        return np.stack([pad_to(k, size) for k in self.kernels])


def basis_from_sigmas(sigmas, sizes) -> GaussianBasis:
    sigmas = tuple(float(s) for s in sigmas)
    sizes = tuple(int(m) for m in sizes)
    if len(sigmas) != len(sizes) or not sigmas:
        raise ValueError("sigmas and sizes must be nonempty and of equal length")
    if sigmas[0] != 0.0 or sizes[0] != 1:
        raise ValueError("first basis element must be the 1x1 Dirac")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly ascending")
    return GaussianBasis(
        sigmas=sigmas,
        sizes=sizes,
        kernels=tuple(make_gaussian(m, s) for m, s in zip(sizes, sigmas)),
        taps_1d=tuple(gaussian_taps_1d(m, s) for m, s in zip(sizes, sigmas)),
    )


def build_gcm_basis(max_size: int = 21) -> GaussianBasis:
    """Fixed Gaussian filter bank with sizes 1, 3, ..., ``max_size``.

    Each odd size ``m > 1`` contributes two kernels with sigma ``(m-2)/4``
    and ``(m-1)/4``; together with the Dirac that makes ``max_size`` kernels.
    """
    if max_size < 3 or max_size % 2 == 0:
        raise ValueError(f"max_size must be odd and >= 3, got {max_size}")
    sigmas, sizes = [0.0], [1]
    for m in range(3, max_size + 1, 2):
        sigmas += [(m - 2) / 4, (m - 1) / 4]
        sizes += [m, m]
    return basis_from_sigmas(sigmas, sizes)


# -------------------------------------------------------------- NNLS fitting


@dataclass
class PsfFit:
    coefficients: np.ndarray
    residual: float
    iterations: int
    objective_history: list[float] = field(default_factory=list, repr=False)


def _largest_eigenvalue(gram: np.ndarray, iters: int = 500, seed: int = 0) -> float:
    v = np.random.default_rng(seed).random(gram.shape[0]) + 0.5
    lam = 0.0
    for _ in range(iters):
        w = gram @ v
        lam_new = float(v @ w) / float(v @ v)
        v = w / np.linalg.norm(w)
        if abs(lam_new - lam) <= 1e-14 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # the Rayleigh quotient approaches from below; a small margin keeps 1/L a valid step
    return lam * (1.0 + 1e-9)


def _common_support(target: np.ndarray, basis: GaussianBasis) -> tuple[np.ndarray, np.ndarray]:
    size = max(target.shape[0], basis.max_size)
    return pad_to(target, size), basis.padded(size)


def nnls_projected_gradient(A: np.ndarray, b: np.ndarray, x0=None, tol: float = 1e-10, max_iter: int = 20000, history: bool = False):
    """Minimize ``0.5 * ||A x - b||^2`` over ``x >= 0`` by projected gradient.

    Fixed step ``1/L`` with ``L`` the largest eigenvalue of ``A^T A``; stops
    when the relative objective decrease drops below ``tol`` or the objective
    reaches zero. ``b`` may be a matrix, in which case every column is an
    independent problem with its own stopping test. Returns
    ``(x, iterations, objective_history)``; history is kept for vector ``b`` only.
    """
    vector = b.ndim == 1
    B = b[:, None] if vector else b
    n = B.shape[1]
    G = A.T @ A
    C = A.T @ B
    X = np.zeros((A.shape[1], n)) if x0 is None else np.maximum(np.asarray(x0, dtype=np.float64).reshape(A.shape[1], n), 0.0)
    step = 1.0 / _largest_eigenvalue(G)
    floor = 1e-30 * np.einsum("ij,ij->j", B, B)
    R = A @ X - B
    f = 0.5 * np.einsum("ij,ij->j", R, R)
    iters = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(f > floor)
    hist = [float(f[0])] if history and vector else []
    it = 0
    while it < max_iter and active.size:
        Xa = X[:, active]
        grad = G @ Xa - C[:, active]
        D = np.maximum(Xa - step * grad, 0.0) - Xa
        # exact change of the quadratic along the step, free of cancellation against ||b||^2
        df = np.einsum("ij,ij->j", grad, D) + 0.5 * np.einsum("ij,ij->j", D, G @ D)
        fa = np.maximum(f[active] + df, 0.0)
        it += 1
        finished = (-df <= tol * f[active]) | (fa <= floor[active])
        X[:, active] = Xa + D
        f[active] = fa
        iters[active] = it
        if hist:
            hist.append(float(fa[0]))
        active = active[~finished]
    if vector:
        return X[:, 0], int(iters[0]), hist
    return X, iters, hist


def _warm_start(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # best nonnegative combination of at most two columns per target. Singles are
    # among the candidates, so monotone descent from here keeps the mixture at
    # least as good as any individual basis element; pairs matter because PG
    # creeps along the nearly collinear directions between neighbouring sigmas
    G = A.T @ A
    C = A.T @ B  # (K, n)
    K, n = C.shape
    d = np.diag(G)
    single = np.maximum(C, 0.0) / d[:, None]
    gain = single * C  # ||b||^2 - f at the best scaling
    best = np.argmax(gain, axis=0)
    cols = np.arange(n)
    X0 = np.zeros((K, n))
    X0[best, cols] = single[best, cols]
    best_gain = gain[best, cols]
    i, j = np.triu_indices(K, 1)
    det = d[i] * d[j] - G[i, j] ** 2
    ok = det > 1e-12 * d[i] * d[j]
    i, j, det = i[ok], j[ok], det[ok]
    ci, cj = C[i], C[j]  # (P, n)
    a = (d[j, None] * ci - G[i, j][:, None] * cj) / det[:, None]
    b = (d[i, None] * cj - G[i, j][:, None] * ci) / det[:, None]
    pair_gain = np.where((a >= 0) & (b >= 0), a * ci + b * cj, -np.inf)
    p = np.argmax(pair_gain, axis=0)
    win = pair_gain[p, cols] > best_gain
    if np.any(win):
        w = cols[win]
        X0[:, w] = 0.0
        X0[i[p[w]], w] = a[p[w], w]
        X0[j[p[w]], w] = b[p[w], w]
    return X0


def _check_target(target) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 2 or target.shape[0] != target.shape[1] or target.shape[0] % 2 == 0:
        raise ValueError(f"target must be an odd square kernel, got shape {target.shape}")
    if abs(target.sum() - 1.0) > 1e-6:
        raise ValueError(f"target kernel must sum to 1 (sums to {target.sum():.6g})")
    return target


def fit_psfs(targets, basis: GaussianBasis, tol: float = 1e-10, max_iter: int = 20000) -> list[PsfFit]:
    """Batched :func:`fit_psf`: all targets share the basis, hence the step size."""
    targets = [_check_target(t) for t in targets]
    if not targets:
        return []
    size = max([basis.max_size] + [t.shape[0] for t in targets])
    A = basis.padded(size).reshape(basis.K, -1).T
    B = np.stack([pad_to(t, size).ravel() for t in targets], axis=1)
    X, iters, _ = nnls_projected_gradient(A, B, _warm_start(A, B), tol=tol, max_iter=max_iter)
    res = np.linalg.norm(A @ X - B, axis=0) / np.linalg.norm(B, axis=0)
    return [PsfFit(X[:, i].copy(), float(res[i]), int(iters[i])) for i in range(len(targets))]


def fit_psf(target: np.ndarray, basis: GaussianBasis, tol: float = 1e-10, max_iter: int = 20000, history: bool = False) -> PsfFit:
    """Fit a normalized isotropic PSF as a nonnegative mixture of the basis.

    Kernels are compared on a common zero-padded grid. ``residual`` is
    ``||target - sum_k beta_k g_k|| / ||target||``. With ``history=True`` the
    objective value after every iteration is recorded.
    """
    t, G = _common_support(_check_target(target), basis)
    A = G.reshape(basis.K, -1).T
    b = t.ravel()
    beta, iters, hist = nnls_projected_gradient(A, b, _warm_start(A, b[:, None])[:, 0], tol=tol, max_iter=max_iter, history=history)
    residual = float(np.linalg.norm(A @ beta - b) / np.linalg.norm(b))
    return PsfFit(coefficients=beta, residual=residual, iterations=iters, objective_history=hist)


def single_element_residuals(target: np.ndarray, basis: GaussianBasis) -> np.ndarray:
    """Relative misfit of each basis kernel taken alone, with unit weight."""
    t, G = _common_support(np.asarray(target, dtype=np.float64), basis)
    return np.linalg.norm((G - t).reshape(basis.K, -1), axis=1) / np.linalg.norm(t)


def true_gaussian_size(sigma: float, cap: int | None = None) -> int:
    """Odd support ``ceil(6 sigma)`` (rounded up to odd) covering +-3 sigma, optionally capped."""
    m = max(int(np.ceil(6.0 * sigma - 1e-9)), 1)
    m += 1 - m % 2
    if cap is not None:
        m = min(m, cap)
    return m


def true_gaussian(sigma: float, cap: int | None = None) -> np.ndarray:
    """Gaussian rendered on its +-3 sigma support; the Dirac for ``sigma == 0``."""
    if sigma == 0:
        return np.ones((1, 1))
    return make_gaussian(true_gaussian_size(sigma, cap), sigma)


DEFAULT_SIGMA_GRID = tuple(np.round(np.arange(1, 101) * 0.05, 10))


def single_gaussian_fit(target: np.ndarray, sigma_grid=DEFAULT_SIGMA_GRID) -> tuple[float, float]:
    """Grid search for the single normalized Gaussian closest to ``target``.

    Each candidate is rendered on its own +-3 sigma support and compared with
    the target on the larger of the two grids. Returns
    ``(best_sigma, relative_residual)``; ties resolve to the smaller sigma.
    """
    grid = sorted(float(s) for s in sigma_grid)
    if not grid:
        raise ValueError("sigma grid is empty")
    target = np.asarray(target, dtype=np.float64)
    tn = np.linalg.norm(target)
    best_sigma, best_r = grid[0], np.inf
    for s in grid:
        g = true_gaussian(s)
        size = max(g.shape[0], target.shape[0])
        r = float(np.linalg.norm(pad_to(target, size) - pad_to(g, size)) / tn)
        if r < best_r:
            best_sigma, best_r = s, r
    return best_sigma, best_r
