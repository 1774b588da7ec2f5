#!/usr/bin/env python3
"""||I - B|| for a uniform blur by every basis kernel: power iteration vs the DFT value.

Kernels whose truncated support makes the transfer function dip below zero
give norms above 1, i.e. the plain fixed-point iteration is not a contraction
for them on periodic images.
"""

import argparse

import numpy as np

from gkm.basis import build_gcm_basis
from gkm.blur import CoefficientMaps
from gkm.solver import operator_norm


def dft_norm(taps, n):
    p = np.zeros(n)
    p[: len(taps)] = taps
    g = np.real(np.fft.fft(np.roll(p, -(len(taps) // 2))))
    g2 = np.outer(g, g)
    return float(np.abs(1 - g2).max()), float(g.min())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--max-size", type=int, default=21)
    ap.add_argument("--dims", type=int, default=64)
    ap.add_argument("--iters", type=int, default=200)
    args = ap.parse_args()

    basis = build_gcm_basis(args.max_size)
    print(" k  sigma  size  min_g_hat_1d   dft_norm  power_norm")
    for k in range(basis.K):
        beta = CoefficientMaps.one_hot(basis, k, (1, 1))
        est = operator_norm(beta, basis, "periodic", dims=(args.dims, args.dims), iters=args.iters)
        want, gmin = dft_norm(basis.taps_1d[k], args.dims)
        print(f"{k + 1:2d}  {basis.sigmas[k]:5.2f}  {basis.sizes[k]:4d}  {gmin:12.5f}  {want:9.5f}  {est:10.5f}")


if __name__ == "__main__":
    main()
