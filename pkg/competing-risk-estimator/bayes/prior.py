"""
Priors and the unnormalized log-posterior.

eta0 ~ Gamma(shape b1, rate a1), eta1 ~ Gamma(shape b2, rate a2),
beta ~ Uniform[beta_l, beta_r], all independent.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

from model import CensoredSample, ModelParams, log_likelihood

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PriorSpec:
    a1: float
    b1: float
    a2: float
    b2: float
    beta_l: float
    beta_r: float

    def __post_init__(self) -> None:
        for name in ("a1", "b1", "a2", "b2", "beta_l", "beta_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"prior hyperparameter {name} must be finite and > 0, got {value!r}")
        if not self.beta_l < self.beta_r:
            raise ValueError(f"beta support must satisfy beta_l < beta_r, got [{self.beta_l}, {self.beta_r}]")

    @classmethod
    def from_intervals(
        cls,
        eta0_interval: Tuple[float, float],
        eta1_interval: Tuple[float, float],
        beta_support: Tuple[float, float],
    ) -> "PriorSpec":
        """Gamma priors moment-matched to the scale intervals, Uniform on the shape support."""
        a1, b1 = hyperparameters_from_interval(*eta0_interval)
        a2, b2 = hyperparameters_from_interval(*eta1_interval)
        return cls(a1=a1, b1=b1, a2=a2, b2=b2, beta_l=beta_support[0], beta_r=beta_support[1])

    @property
    def mean(self) -> ModelParams:
        return ModelParams(
            eta0=self.b1 / self.a1,
            eta1=self.b2 / self.a2,
            beta=0.5 * (self.beta_l + self.beta_r),
        )

    def in_support(self, params: ModelParams) -> bool:
        return self.beta_l <= params.beta <= self.beta_r

    def to_dict(self) -> Dict[str, float]:
        return {
            "a1": self.a1, "b1": self.b1, "a2": self.a2, "b2": self.b2,
            "beta_l": self.beta_l, "beta_r": self.beta_r,
        }


def hyperparameters_from_interval(lo: float, hi: float) -> Tuple[float, float]:
    """
    Gamma (rate, shape) with mean (lo + hi) / 2 and standard deviation (hi - lo) / 4.
    """
    if not 0 < lo < hi:
        raise ValueError(f"interval must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    mean = 0.5 * (lo + hi)
    sd = 0.25 * (hi - lo)
    shape = (mean / sd) ** 2
    rate = mean / sd ** 2
    return rate, shape


def log_prior_kernel(eta0: float, eta1: float, beta: float, prior: PriorSpec) -> float:
    """Log prior up to its normalizing constant; -inf outside the support."""
    if eta0 <= 0 or eta1 <= 0 or not prior.beta_l <= beta <= prior.beta_r:
        return -math.inf
    return (
        (prior.b1 - 1.0) * math.log(eta0)
        + (prior.b2 - 1.0) * math.log(eta1)
        - prior.a1 * eta0
        - prior.a2 * eta1
    )


def log_posterior_kernel(params: ModelParams, sample: CensoredSample, prior: PriorSpec) -> float:
    """Log prior kernel plus censored log-likelihood; the normalizing constant is never formed."""
    log_prior = log_prior_kernel(params.eta0, params.eta1, params.beta, prior)
    if not math.isfinite(log_prior):
        return -math.inf
    return log_prior + log_likelihood(params, sample)
