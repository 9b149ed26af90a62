"""
Bayesian estimation: priors, Metropolis-Hastings sampling, loss-specific
estimators and the quadrature oracle.
"""
from .prior import PriorSpec, hyperparameters_from_interval, log_posterior_kernel, log_prior_kernel
from .sampler import MhConfig, PosteriorDraws, mh_sample
from .losses import (
    BayesReport,
    LossSpec,
    ParameterEstimate,
    estimate,
    estimate_entropy,
    estimate_gq,
    estimate_linex,
    expected_loss,
)
from .quadrature import PosteriorGrid, quadrature_oracle, quadrature_reports

__all__ = [
    "PriorSpec", "hyperparameters_from_interval", "log_posterior_kernel", "log_prior_kernel",
    "MhConfig", "PosteriorDraws", "mh_sample",
    "BayesReport", "LossSpec", "ParameterEstimate",
    "estimate", "estimate_entropy", "estimate_gq", "estimate_linex", "expected_loss",
    "PosteriorGrid", "quadrature_oracle", "quadrature_reports",
]
