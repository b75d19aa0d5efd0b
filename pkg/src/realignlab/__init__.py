"""Denoising-time realignment of diffusion samplers, checked against exact models."""
from .errors import (
    ConfigurationError,
    IllConditionedKernel,
    InsufficientData,
    NonNormalizableTilt,
    NonPositiveDefinite,
    NumericFailure,
    OracleCoverageError,
    RealignError,
)
from .lambda_opt import BOConfig, GPModel, bo_optimize, expected_improvement, gp_posterior, rbf_kernel, ucb
from .metrics import (
    PairedMetrics,
    PairedRow,
    SummaryStats,
    bootstrap_mae_ci,
    ecdf,
    energy_distance,
    mc_reward_mean,
    summarize,
    wasserstein_1d,
)
from .mixture import (
    BlackboxReward,
    ConditionedModel,
    GaussianMixture,
    LinearReward,
    QuadraticReward,
    exact_eps,
    gaussian,
    make_conditional_family,
    noised_marginal,
    reward_expectation,
    tilt,
    tilt_family,
)
from .realign import (
    PosteriorGaussian,
    RealignWeights,
    geometric_interpolate,
    geometric_mixture_logdensity,
    grid_normalize_oracle,
    multi_geometric_interpolate,
)
from .sampler import SampleBatch, SamplerConfig, baseline_sample, cfg_eps, deradiff_sample
from .schedule import NoiseSchedule, StepPair, forward_marginal, make_schedule, scheduler_posterior

__version__ = "0.1.0"
