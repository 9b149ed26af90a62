"""
Random-walk Metropolis-Hastings on the joint posterior of (eta0, eta1, beta).

Proposals are Gaussian in (log eta0, log eta1, logit((beta - beta_l) / (beta_r - beta_l)));
the log-Jacobian of that map is part of the target. Proposal scales adapt
toward the target acceptance rate during burn-in and are frozen afterwards.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit, log_expit, logit

from mle import NO_EXPONENTIAL, NO_WEIBULL, ConvergenceError, em_fit
from model import PARAMETER_NAMES, CensoredSample, ModelParams, log_likelihood_arrays

from .prior import PriorSpec, log_prior_kernel

logger = logging.getLogger(__name__)

ACCEPTANCE_BAND = (0.1, 0.6)
SUPPORT_MARGIN = 1e-3


@dataclass(frozen=True)
class MhConfig:
    n_draws: int = 60000
    burn_in: int = 10000
    thin: int = 5
    step_sizes: Tuple[float, float, float] = (0.3, 0.3, 0.8)
    seed: int = 0
    adapt: bool = True
    target_acceptance: float = 0.3
    adapt_interval: int = 100

    def __post_init__(self) -> None:
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if not 0 <= self.burn_in < self.n_draws:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_draws")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if len(self.step_sizes) != 3 or any(s <= 0 for s in self.step_sizes):
            raise ValueError("step_sizes must be three positive numbers")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must be in (0, 1)")
        if self.adapt_interval < 1:
            raise ValueError("adapt_interval must be >= 1")
        object.__setattr__(self, "step_sizes", tuple(float(s) for s in self.step_sizes))


@dataclass
class PosteriorDraws:
    """Post burn-in, thinned draws as an (m, 3) array in (eta0, eta1, beta) order."""
    draws: np.ndarray
    acceptance_rate: float
    config: MhConfig
    warnings: List[str] = field(default_factory=list)
    chain: Optional[np.ndarray] = field(default=None, repr=False)
    accepted: Optional[np.ndarray] = field(default=None, repr=False)
    final_step_sizes: Optional[Tuple[float, float, float]] = None

    def __post_init__(self) -> None:
        self.draws = np.asarray(self.draws, dtype=float).reshape(-1, 3)
        if self.draws.shape[0] == 0:
            raise ValueError("posterior draws are empty")

    @classmethod
    def degenerate(cls, params: ModelParams, count: int = 1, config: Optional[MhConfig] = None) -> "PosteriorDraws":
        """Point-mass chain repeating `params`."""
        draws = np.tile(params.as_array(), (count, 1))
        return cls(draws=draws, acceptance_rate=0.0, config=config or MhConfig(n_draws=count + 1, burn_in=0))

    def __len__(self) -> int:
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, PARAMETER_NAMES.index(name)]

    def params(self) -> List[ModelParams]:
        return [ModelParams.from_sequence(row) for row in self.draws]

    def mean(self) -> ModelParams:
        return ModelParams.from_sequence(self.draws.mean(axis=0))

    def chain_frame(self) -> pd.DataFrame:
        """Every iteration, burn-in included, for external diagnostics."""
        if self.chain is None or self.accepted is None:
            raise ValueError("chain trace was not retained")
        frame = pd.DataFrame(self.chain, columns=list(PARAMETER_NAMES))
        frame.insert(0, "iteration", np.arange(len(frame)))
        frame["accepted"] = self.accepted.astype(int)
        return frame


class _Target:
    """Log target in unconstrained coordinates, Jacobian included."""

    def __init__(self, sample: CensoredSample, prior: PriorSpec):
        self.prior = prior
        self.width = prior.beta_r - prior.beta_l
        self.times = sample.times
        self.failures = sample.failures

    def to_params(self, theta: np.ndarray) -> Tuple[float, float, float]:
        return (
            math.exp(theta[0]),
            math.exp(theta[1]),
            self.prior.beta_l + self.width * float(expit(theta[2])),
        )

    def to_theta(self, params: ModelParams) -> np.ndarray:
        s = (params.beta - self.prior.beta_l) / self.width
        return np.array([math.log(params.eta0), math.log(params.eta1), float(logit(s))])

    def __call__(self, theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)):
            return -math.inf
        with np.errstate(over="ignore"):
            try:
                eta0, eta1, beta = self.to_params(theta)
            except OverflowError:
                return -math.inf
        log_prior = log_prior_kernel(eta0, eta1, beta, self.prior)
        if not math.isfinite(log_prior):
            return -math.inf
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            log_lik = log_likelihood_arrays(eta0, eta1, beta, self.times, self.failures)
        if not math.isfinite(log_lik):
            return -math.inf
        log_jacobian = theta[0] + theta[1] + float(log_expit(theta[2]) + log_expit(-theta[2]))
        return log_prior + log_lik + log_jacobian


def initial_point(sample: CensoredSample, prior: PriorSpec) -> ModelParams:
    """
    EM estimate clamped into the prior support; prior mean when EM is unavailable.

    A boundary EM fit sends one scale towards infinity; that scale starts at its
    prior mean instead.
    """
    start = prior.mean
    if sample.n_failures > 0:
        try:
            report = em_fit(sample)
        except (ValueError, ConvergenceError) as exc:
            logger.warning(f"EM initialisation failed ({exc}); starting at the prior mean")
        else:
            start = report.params
            if report.boundary == NO_EXPONENTIAL:
                start = ModelParams(eta0=prior.mean.eta0, eta1=start.eta1, beta=start.beta)
            elif report.boundary == NO_WEIBULL:
                start = ModelParams(eta0=start.eta0, eta1=prior.mean.eta1, beta=start.beta)
    margin = SUPPORT_MARGIN * (prior.beta_r - prior.beta_l)
    beta = min(max(start.beta, prior.beta_l + margin), prior.beta_r - margin)
    return ModelParams(eta0=start.eta0, eta1=start.eta1, beta=beta)


def mh_sample(
    sample: CensoredSample,
    prior: PriorSpec,
    config: MhConfig,
    init: Optional[ModelParams] = None,
    keep_chain: bool = True,
) -> PosteriorDraws:
    target = _Target(sample, prior)
    start = init if init is not None else initial_point(sample, prior)
    theta = target.to_theta(start)
    current = target(theta)
    if not math.isfinite(current):
        raise ValueError(f"posterior kernel is not finite at the initial point {start}")

    rng = np.random.default_rng(config.seed)
    scales = np.array(config.step_sizes, dtype=float)
    chain = np.empty((config.n_draws, 3)) if keep_chain else None
    accepted_flags = np.zeros(config.n_draws, dtype=bool) if keep_chain else None
    kept: List[Tuple[float, float, float]] = []
    window_accepts = 0
    post_accepts = 0

    for i in range(config.n_draws):
        proposal = theta + scales * rng.standard_normal(3)
        proposed = target(proposal)
        log_u = math.log(1.0 - rng.random())
        accept = math.isfinite(proposed) and log_u < proposed - current
        if accept:
            theta, current = proposal, proposed

        values = target.to_params(theta)
        if keep_chain:
            chain[i] = values
            accepted_flags[i] = accept

        if i < config.burn_in:
            window_accepts += accept
            if config.adapt and (i + 1) % config.adapt_interval == 0:
                rate = window_accepts / config.adapt_interval
                scales *= math.exp(2.0 * (rate - config.target_acceptance))
                logger.debug(f"MH adaptation at {i + 1}: window acceptance {rate:.3f}, scales {scales}")
                window_accepts = 0
        else:
            post_accepts += accept
            if (i - config.burn_in) % config.thin == 0:
                kept.append(values)

    acceptance_rate = post_accepts / (config.n_draws - config.burn_in)
    warnings: List[str] = []
    lo, hi = ACCEPTANCE_BAND
    if not lo <= acceptance_rate <= hi:
        message = f"MH acceptance rate {acceptance_rate:.3f} outside [{lo}, {hi}]"
        warnings.append(message)
        logger.warning(message)

    return PosteriorDraws(
        draws=np.array(kept),
        acceptance_rate=acceptance_rate,
        config=config,
        warnings=warnings,
        chain=chain,
        accepted=accepted_flags,
        final_step_sizes=tuple(float(s) for s in scales),
    )
