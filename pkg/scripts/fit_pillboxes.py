#!/usr/bin/env python3
"""Fit pillbox PSFs of radius 1..R onto the basis and compare against single-kernel baselines."""

import argparse

from gkm.basis import build_gcm_basis, fit_psf, pillbox, single_element_residuals, single_gaussian_fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-radius", type=int, default=5)
    ap.add_argument("--max-size", type=int, default=21)
    args = ap.parse_args()

    basis = build_gcm_basis(args.max_size)
    print("radius  gkm_residual  iterations  best_element  best_gaussian  sigma")
    for r in range(1, args.max_radius + 1):
        t = pillbox(r)
        fit = fit_psf(t, basis)
        elem = single_element_residuals(t, basis).min()
        sigma, gauss = single_gaussian_fit(t)
        print(f"{r:6d}  {fit.residual:12.6f}  {fit.iterations:10d}  {elem:12.6f}  {gauss:13.6f}  {sigma:5.2f}")


if __name__ == "__main__":
    main()
