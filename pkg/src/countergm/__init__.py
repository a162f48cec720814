"""Exponential-family models for networks whose ties carry counts.

The package models an n-actor network of non-negative integer dyad values
y_ij with densities of the form

    P(Y = y) ∝ h(y) · exp(θ · g(y)),

where g is a vector of user-chosen sufficient statistics and the reference
measure h sets the baseline tail behaviour (Poisson-like or geometric-like).
It provides exact evaluation of statistics and their change scores, a
Metropolis–Hastings sampler tuned for count dyads, Monte Carlo maximum
likelihood and method-of-moments estimation, goodness-of-fit tests, and a
command-line interface.

>>> import countergm as cg
>>> net = cg.load_karate().network
>>> model = cg.ModelSpec(terms=(cg.Sum(), cg.NonzeroCount()))
>>> fit = cg.mcmc_mle(model, net)          # doctest: +SKIP
"""
from __future__ import annotations

from .datasets import Dataset, fraternity_available, load_fraternity, load_karate
from .distributions import (
    CmpParams,
    ParameterSpaceError,
    SeriesTruncationError,
    cmp_in_natural_space,
    cmp_log_pmf,
    cmp_moments,
    cmp_pmf,
    geometric_log_pmf,
    log_factorial,
    log_series_sum,
    poisson_log_pmf,
    sqrt_model_moments,
    sqrt_model_tune,
    zmp_log_pmf,
    zmp_match_zero,
    zmp_pmf,
)
from .inference import (
    DegeneracyError,
    DiagnosticsReport,
    FitControl,
    FitResult,
    MonteCarloTest,
    default_theta0,
    diagnostics,
    effective_sample_size,
    fit_diagnostics,
    log_normconst_ratio,
    mcmc_mle,
    mom_fit,
    monte_carlo_test,
)
from .network import (
    CountNetwork,
    NetworkFormatError,
    NetworkSummary,
    NodeAttributes,
    read_attributes,
    read_edge_list,
    summary,
    write_edge_list,
)
from .sampler import SampleBatch, SamplerControl, mh_step, proposal_pmf, sample
from .terms import (
    CMP,
    ActorCovariance,
    ActorSum,
    ConstraintError,
    DyadCovariate,
    ModelError,
    ModelSpec,
    MutualGeoMean,
    MutualMin,
    MutualNegAbsDiff,
    MutualProduct,
    NonzeroCount,
    SqrtSum,
    StatVector,
    Sum,
    ThetaConstraint,
    Transitivity,
    check_theta,
    conditional_logratio,
    discrete_change,
    eval_stats,
    log_reference_ratio,
    theta_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "ActorCovariance",
    "ActorSum",
    "CMP",
    "CmpParams",
    "ConstraintError",
    "CountNetwork",
    "Dataset",
    "DegeneracyError",
    "DiagnosticsReport",
    "DyadCovariate",
    "FitControl",
    "FitResult",
    "ModelError",
    "ModelSpec",
    "MonteCarloTest",
    "MutualGeoMean",
    "MutualMin",
    "MutualNegAbsDiff",
    "MutualProduct",
    "NetworkFormatError",
    "NetworkSummary",
    "NodeAttributes",
    "NonzeroCount",
    "ParameterSpaceError",
    "SampleBatch",
    "SamplerControl",
    "SeriesTruncationError",
    "SqrtSum",
    "StatVector",
    "Sum",
    "ThetaConstraint",
    "Transitivity",
    "check_theta",
    "cmp_in_natural_space",
    "cmp_log_pmf",
    "cmp_moments",
    "cmp_pmf",
    "conditional_logratio",
    "default_theta0",
    "diagnostics",
    "discrete_change",
    "effective_sample_size",
    "eval_stats",
    "fit_diagnostics",
    "fraternity_available",
    "geometric_log_pmf",
    "load_fraternity",
    "load_karate",
    "log_factorial",
    "log_normconst_ratio",
    "log_reference_ratio",
    "log_series_sum",
    "mcmc_mle",
    "mh_step",
    "mom_fit",
    "monte_carlo_test",
    "poisson_log_pmf",
    "proposal_pmf",
    "read_attributes",
    "read_edge_list",
    "sample",
    "sqrt_model_moments",
    "sqrt_model_tune",
    "summary",
    "theta_constraints",
    "write_edge_list",
    "zmp_log_pmf",
    "zmp_match_zero",
    "zmp_pmf",
    "__version__",
]
