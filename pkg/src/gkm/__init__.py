"""Gaussian kernel mixture model of defocus blur and fixed-point deblurring."""

__version__ = "0.1.0"

from .basis import GaussianBasis, build_gcm_basis, fit_psf, make_gaussian, single_gaussian_fit
from .blur import CoefficientMaps, GammaMaps, add_noise, apply_blur, apply_blur_adjoint, basis_responses
from .estimate import estimate_from_psf_field, estimate_oracle
from .image import build_pyramid, downsample2, read_image, read_planes, upsample2, write_image, write_planes
from .metrics import psnr, ssim
from .multiscale import SolverConfig, downsample_coefficients, solve_multiscale
from .solver import StopRule, derive_gamma, fixed_point_step, operator_norm, solve_single_scale

__all__ = [
    "add_noise",
    "apply_blur",
    "apply_blur_adjoint",
    "basis_responses",
    "build_gcm_basis",
    "build_pyramid",
    "CoefficientMaps",
    "derive_gamma",
    "downsample2",
    "downsample_coefficients",
    "estimate_from_psf_field",
    "estimate_oracle",
    "fit_psf",
    "fixed_point_step",
    "GammaMaps",
    "GaussianBasis",
    "make_gaussian",
    "operator_norm",
    "psnr",
    "read_image",
    "read_planes",
    "single_gaussian_fit",
    "solve_multiscale",
    "solve_single_scale",
    "SolverConfig",
    "ssim",
    "StopRule",
    "upsample2",
    "write_image",
    "write_planes",
]
