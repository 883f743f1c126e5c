"""Projected and skew-reflected non-reversible Langevin samplers on compact sets."""

from .diagnostics import (
    accuracy,
    asymptotic_variance_batch_means,
    compare_methods,
    mse,
    scgf_estimate,
    w1_per_dimension,
)
from .fields import (
    BlockCross,
    ConstantTridiag,
    Cross3D,
    SublevelCurl,
    ZeroField,
    validate_assumptions,
)
from .geometry import (
    Ball,
    RayMiss,
    SmoothedLp,
    Sublevel,
    contains,
    outward_normal,
    project_euclidean,
    skew_normal,
    skew_project,
    smoothed_lp_ball,
)
from .oracle import GaussianProposal, moments, rejection_sample
from .samplers import SamplerConfig, run_chain, run_ensemble, step
from .targets import (
    BayesLinear,
    BayesLogistic,
    MinibatchSpec,
    QuadraticGaussian,
    grad_full,
    grad_minibatch,
    make_synthetic_linear,
    make_synthetic_logistic,
)

__version__ = "0.1.0"
