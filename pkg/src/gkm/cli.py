"""``gkm`` command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_gcm_basis, fit_psf
from .bench import DEFAULT_NOISE, fmt, run_bench
from .blur import BOUNDARY_MODES, CoefficientMaps, add_noise, apply_blur
from .estimate import estimate_oracle, scale_coefficients_from_defocus
from .image import FormatError, build_pyramid, read_image, read_planes, write_image, write_planes
from .metrics import psnr, ssim
from .multiscale import SolverConfig, downsample_coefficients, solve_multiscale
from .parallel import default_threads, thread_budget
from .solver import StopRule, derive_gamma, operator_norm, solve_single_scale
from .synth import SceneSpec, default_suite, parse_dims, synth_scene


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _odd_size(text: str) -> int:
    m = int(text)
    if m < 3 or m % 2 == 0:
        raise argparse.ArgumentTypeError("max size must be odd and >= 3")
    return m


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _noise_list(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(",") if s.strip())


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--max-size", type=_odd_size, default=21, help="largest Gaussian kernel size M (odd, default 21)")
    g.add_argument("--boundary", choices=BOUNDARY_MODES, default="replicate", help="filter boundary rule")
    g.add_argument("--threads", type=_positive, default=None, help="thread budget (default: $GKM_THREADS or 1)")
    g.add_argument("--seed", type=int, default=0, help="random seed")

    p = _Parser(prog="gkm", description="Gaussian kernel mixture defocus blur model and fixed-point deblurring.")
    p.add_argument("--version", action="version", version=f"gkm {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("basis", parents=[common], help="dump the Gaussian basis as a GKMF stack")
    s.add_argument("--out", required=True)

    s = sub.add_parser("fit-psf", parents=[common], help="fit a PSF (first GKMF plane) onto the basis")
    s.add_argument("--target", required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=_positive, default=20000)

    s = sub.add_parser("blur", parents=[common], help="apply the mixture blur to a PNG")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--coeffs", required=True, help="GKMF stack of K simplex coefficient planes")
    s.add_argument("--noise", type=float, default=0.0, help="noise std on the 0-255 scale")
    s.add_argument("--out", required=True)
    s.add_argument("--bits", type=int, choices=(8, 16), default=16)

    s = sub.add_parser("estimate", parents=[common], help="oracle coefficients from a defocus map")
    s.add_argument("--defocus", required=True)
    s.add_argument("--q", type=float, default=0.01, help="sigma quantization step")
    s.add_argument("--out", required=True)

    s = sub.add_parser("deblur", parents=[common], help="fixed-point deblurring (single- or multi-scale)")
    s.add_argument("--in", dest="input", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--coeffs")
    src.add_argument("--defocus")
    s.add_argument("--q", type=float, default=0.01)
    s.add_argument("--iters", type=_positive, default=3)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--multiscale", action="store_true")
    s.add_argument("--scales", type=_positive, default=3)
    s.add_argument("--inner-iters", type=_positive, default=1)
    s.add_argument("--rescale-sigma", action="store_true", help="refit per-scale coefficients for sigma / 2^(T-t); needs --defocus")
    s.add_argument("--gt", help="ground-truth PNG for per-scale PSNR/SSIM in the trace")
    s.add_argument("--trace")
    s.add_argument("--out", required=True)
    s.add_argument("--bits", type=int, choices=(8, 16), default=16)

    s = sub.add_parser("analyze", parents=[common], help="power-iteration estimate of ||I - B||")
    s.add_argument("--coeffs", required=True)
    s.add_argument("--dims", type=parse_dims, default=None, help="HxW; 1x1 coefficient maps are broadcast")
    s.add_argument("--iters", type=_positive, default=100)

    s = sub.add_parser("synth", parents=[common], help="render a synthetic scene from a key=value spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("bench", parents=[common], help="run the benchmark suite")
    s.add_argument("--suite", choices=("default",), default="default")
    s.add_argument("--scales", type=_positive, default=3)
    s.add_argument("--inner-iters", type=_positive, default=1)
    s.add_argument("--noise", type=_noise_list, default=DEFAULT_NOISE, help="comma-separated noise levels")
    s.add_argument("--dims", type=parse_dims, default=(128, 128))
    s.add_argument("--no-timings", action="store_true", help="write 0 seconds for a byte-stable report")
    s.add_argument("--no-images", action="store_true")
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("metrics", parents=[common], help="PSNR and SSIM between two PNGs")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    return p


def _load_beta(path, basis, shape=None) -> CoefficientMaps:
    planes = read_planes(path).astype(np.float64)
    if planes.shape[0] != basis.K:
        raise ValueError(f"{path}: {planes.shape[0]} coefficient planes, basis has {basis.K}")
    if shape is not None and planes.shape[1:] != tuple(shape):
        raise ValueError(f"{path}: maps are {planes.shape[1]}x{planes.shape[2]}, image is {shape[0]}x{shape[1]}")
    return CoefficientMaps.from_simplex(planes, basis)


def _cmd_basis(args, basis):
    write_planes(basis.padded(), args.out)


def _cmd_fit_psf(args, basis):
    planes = read_planes(args.target)
    if planes.shape[0] != 1:
        raise ValueError(f"{args.target}: expected one PSF plane, got {planes.shape[0]}")
    target = planes[0].astype(np.float64)
    fit = fit_psf(target, basis, args.tol, args.max_iter)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["residual", "iterations"] + [f"beta_{k + 1}" for k in range(basis.K)])
    w.writerow([fmt(fit.residual), fit.iterations] + [fmt(c) for c in fit.coefficients])


def _cmd_blur(args, basis):
    x = read_image(args.input)
    beta = _load_beta(args.coeffs, basis, x.shape[1:])
    y = add_noise(apply_blur(x, beta, basis, args.boundary), args.noise, args.seed)
    write_image(y, args.out, args.bits)


def _cmd_estimate(args, basis):
    d = read_planes(args.defocus)
    if d.shape[0] != 1:
        raise ValueError(f"{args.defocus}: expected one defocus plane, got {d.shape[0]}")
    write_planes(estimate_oracle(d[0], basis, args.q).planes, args.out)


def _cmd_deblur(args, basis):
    y = read_image(args.input)
    gt = read_image(args.gt) if args.gt else None
    if gt is not None and gt.shape != y.shape:
        raise ValueError(f"ground truth {gt.shape} does not match input {y.shape}")
    if args.rescale_sigma and not args.defocus:
        raise UsageError("deblur: --rescale-sigma requires --defocus")
    if args.defocus:
        d = read_planes(args.defocus)[0]
        if d.shape != y.shape[1:]:
            raise ValueError(f"defocus map is {d.shape}, image is {y.shape[1:]}")
    rows = []
    if args.multiscale:
        config = SolverConfig(scales=args.scales, inner_iters=args.inner_iters, boundary=args.boundary, rel_change_tol=args.tol)
        if args.defocus:
            coeffs = scale_coefficients_from_defocus(d, basis, args.scales, args.q, args.rescale_sigma)
        else:
            coeffs = downsample_coefficients(_load_beta(args.coeffs, basis, y.shape[1:]), args.scales)
        x, traces, outputs = solve_multiscale(y, coeffs, basis, config, keep_scales=True)
        header = ["scale", "iteration", "residual_norm", "rel_change"]
        for t, tr in enumerate(traces, start=1):
            for i, (r, c) in enumerate(zip(tr.residual_norms, tr.rel_changes), start=1):
                rows.append([t, i, fmt(r), fmt(c)])
        quality = []
        if gt is not None:
            for t, (x_t, gt_t) in enumerate(zip(outputs, build_pyramid(gt, args.scales)), start=1):
                quality.append([t, fmt(psnr(x_t, gt_t)), fmt(ssim(x_t, gt_t)) if min(x_t.shape[1:]) >= 11 else "nan"])
    else:
        beta = estimate_oracle(d, basis, args.q) if args.defocus else _load_beta(args.coeffs, basis, y.shape[1:])
        x, tr = solve_single_scale(y, derive_gamma(beta), basis, args.boundary, StopRule(args.iters, args.tol))
        header = ["iteration", "residual_norm", "rel_change"]
        rows = [[i, fmt(r), fmt(c)] for i, (r, c) in enumerate(zip(tr.residual_norms, tr.rel_changes), start=1)]
        quality = [[1, fmt(psnr(x, gt)), fmt(ssim(x, gt))]] if gt is not None else []
    write_image(x, args.out, args.bits)
    if args.trace:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        if quality:
            w.writerow([])
            w.writerow(["scale", "psnr", "ssim"])
            w.writerows(quality)
        Path(args.trace).write_text(buf.getvalue())


def _cmd_analyze(args, basis):
    beta = _load_beta(args.coeffs, basis)
    print(f"operator_norm={fmt(operator_norm(beta, basis, args.boundary, args.dims, args.iters, args.seed))}")


def _cmd_synth(args, basis):
    spec = SceneSpec.parse(Path(args.spec).read_text())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clean, blurred, defocus = synth_scene(spec, basis=basis, mode=args.boundary)
    write_image(clean, out / "clean.png")
    write_image(blurred, out / "blurred.png")
    write_planes(defocus[None], out / "defocus.gkmf")
    write_planes(estimate_oracle(defocus, basis).planes, out / "beta.gkmf")


def _cmd_bench(args, basis):
    config = SolverConfig(scales=args.scales, inner_iters=args.inner_iters, boundary=args.boundary)
    suite = default_suite(args.dims)
    text = run_bench(suite, config, args.out_dir, args.noise, basis, timings=not args.no_timings, write_images=not args.no_images)
    sys.stdout.write(text)


def _cmd_metrics(args, basis):
    a, b = read_image(args.a), read_image(args.b)
    print(f"psnr={fmt(psnr(a, b))} ssim={fmt(ssim(a, b))}")


COMMANDS = {
    "basis": _cmd_basis,
    "fit-psf": _cmd_fit_psf,
    "blur": _cmd_blur,
    "estimate": _cmd_estimate,
    "deblur": _cmd_deblur,
    "analyze": _cmd_analyze,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
    "metrics": _cmd_metrics,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = args.threads or default_threads()
        with thread_budget(threads):
            COMMANDS[args.command](args, build_gcm_basis(args.max_size))
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (FormatError, ValueError, OSError) as exc:
        print(f"gkm: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
