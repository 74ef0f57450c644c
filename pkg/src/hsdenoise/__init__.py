"""Unsupervised hyperspectral denoising with mixture-factor deep priors.

A noisy I x J x K cube is fit by a sum of R rank-one spatio-spectral
factors: small untrained hourglass networks generate the nonnegative
abundance maps and small fully connected networks generate the
nonnegative spectral signatures. Sparse outliers (stripes, deadlines,
impulses) are handled by an explicit L1-regularised outlier cube solved
exactly by soft-thresholding in an alternating loop with Adam steps on
the networks. The denoised estimate is the factor reconstruction alone.
"""

from .cube import (
    AbundanceMap,
    Cube,
    Signature,
    frobenius_norm,
    l1_norm,
    mode3_fold,
    mode3_unfold,
    outer_accumulate,
    outer_accumulate_empty,
)
from .errors import ConfigError, DivergenceError, ShapeMismatchError
from .metrics import MetricReport, evaluate, psnr, sam, snr, ssim
from .networks import (
    LatentInput,
    SharedSpatialGenerator,
    SpatialGenerator,
    SpatialNetConfig,
    SpectralGenerator,
    SpectralNetConfig,
)
from .noise import NoiseSpec, corrupt
from .solver import DenoiseResult, SolverConfig, run, soft_threshold, update_outliers
from .synth import SynthSpec, make_lmm_cube

__version__ = "0.1.0"

__all__ = [
    "AbundanceMap",
    "ConfigError",
    "Cube",
    "DenoiseResult",
    "DivergenceError",
    "LatentInput",
    "MetricReport",
    "NoiseSpec",
    "ShapeMismatchError",
    "SharedSpatialGenerator",
    "Signature",
    "SolverConfig",
    "SpatialGenerator",
    "SpatialNetConfig",
    "SpectralGenerator",
    "SpectralNetConfig",
    "SynthSpec",
    "corrupt",
    "evaluate",
    "frobenius_norm",
    "l1_norm",
    "make_lmm_cube",
    "mode3_fold",
    "mode3_unfold",
    "outer_accumulate",
    "outer_accumulate_empty",
    "psnr",
    "run",
    "sam",
    "snr",
    "soft_threshold",
    "ssim",
    "update_outliers",
]
