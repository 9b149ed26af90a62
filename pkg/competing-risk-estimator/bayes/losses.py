"""
Bayes estimators and posterior risks under three loss families.

Each estimator is a reduction over (values, weights) for one scalar parameter:
Monte-Carlo draws use uniform weights, the quadrature oracle uses node weights,
so both paths share the same arithmetic.

    gq(alpha)    tau(l) (l - d)^2 with tau(l) = l^(alpha - 1)
    entropy(p)   (d / l)^p - p log(d / l) - 1
    linex(r)     exp(r (d - l)) - r (d - l) - 1
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from model import PARAMETER_NAMES

from .sampler import PosteriorDraws

logger = logging.getLogger(__name__)

LOSS_KINDS = ("gq", "entropy", "linex")

Column = Tuple[np.ndarray, Optional[np.ndarray]]


@dataclass(frozen=True)
class LossSpec:
    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if not math.isfinite(self.value):
            raise ValueError(f"loss parameter must be finite, got {self.value!r}")
        if self.kind in ("entropy", "linex") and self.value == 0:
            raise ValueError(f"{self.kind} loss parameter must be nonzero")
        object.__setattr__(self, "value", float(self.value))

    @classmethod
    def gq(cls, alpha: float) -> "LossSpec":
        return cls("gq", alpha)

    @classmethod
    def entropy(cls, p: float) -> "LossSpec":
        return cls("entropy", p)

    @classmethod
    def linex(cls, r: float) -> "LossSpec":
        return cls("linex", r)

    @classmethod
    def parse(cls, text: str) -> "LossSpec":
        """Parse "kind:value", e.g. "gq:-2", "entropy:-1", "linex:-0.5"."""
        kind, sep, value = text.strip().partition(":")
        if not sep:
            raise ValueError(f"loss must look like kind:value, got {text!r}")
        try:
            number = float(value)
        except ValueError:
            raise ValueError(f"loss parameter is not a number in {text!r}") from None
        return cls(kind.strip().lower(), number)

    @property
    def symbol(self) -> str:
        return {"gq": "alpha", "entropy": "p", "linex": "r"}[self.kind]

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.value:g}"


@dataclass(frozen=True)
class ParameterEstimate:
    estimate: float
    risk: float


@dataclass
class BayesReport:
    estimates: Dict[str, ParameterEstimate]
    loss: LossSpec
    flags: List[str] = field(default_factory=list)

    def estimate_of(self, name: str) -> float:
        return self.estimates[name].estimate

    def risk_of(self, name: str) -> float:
        return self.estimates[name].risk

    def to_dict(self) -> Dict[str, Any]:
        return {
            "loss": {"kind": self.loss.kind, self.loss.symbol: self.loss.value},
            "estimates": {name: e.estimate for name, e in self.estimates.items()},
            "posterior_risk": {name: e.risk for name, e in self.estimates.items()},
            "flags": list(self.flags),
        }


def _normalized(values: np.ndarray, weights: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot estimate from an empty set of draws")
    if weights is None:
        return values, None
    weights = np.asarray(weights, dtype=float)
    if weights.shape != values.shape:
        raise ValueError("weights must match values in shape")
    if np.any(weights < 0) or not np.isfinite(weights).all():
        raise ValueError("weights must be finite and nonnegative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    return values, weights / total


def _expect(f: np.ndarray, weights: Optional[np.ndarray]) -> float:
    if weights is None:
        return float(np.mean(f))
    return float(np.dot(weights, f))


def gq_statistics(values: np.ndarray, alpha: float, weights: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(E[l^alpha] / E[l^(alpha-1)], E[l^(alpha-1) (l - est)^2])."""
    values, weights = _normalized(values, weights)
    if alpha != 1.0 and np.any(values <= 0):
        raise ValueError("GQ loss with alpha != 1 needs strictly positive values")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        tau = np.power(values, alpha - 1.0)
        denominator = _expect(tau, weights)
        numerator = _expect(tau * values, weights)
    if denominator == 0 or not math.isfinite(denominator) or not math.isfinite(numerator):
        raise ValueError(f"E[lambda^(alpha-1)] is zero or not finite for alpha={alpha}")
    est = numerator / denominator
    risk = _expect(tau * (values - est) ** 2, weights)
    return est, risk


def entropy_statistics(values: np.ndarray, p: float, weights: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """((E[l^-p])^(-1/p), p (E[log l] - log est))."""
    if p == 0:
        raise ValueError("entropy loss parameter p must be nonzero")
    values, weights = _normalized(values, weights)
    if np.any(values <= 0):
        raise ValueError("entropy loss needs strictly positive values")
    with np.errstate(over="ignore"):
        moment = _expect(np.power(values, -p), weights)
    if moment <= 0 or not math.isfinite(moment):
        raise ValueError(f"E[lambda^-p] is not finite for p={p}")
    est = moment ** (-1.0 / p)
    risk = p * (_expect(np.log(values), weights) - math.log(est))
    return est, risk


def linex_statistics(values: np.ndarray, r: float, weights: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(-(1/r) log E[exp(-r l)], r (E[l] - est)); the log-mean-exp is max-shifted."""
    if r == 0:
        raise ValueError("linex loss parameter r must be nonzero")
    values, weights = _normalized(values, weights)
    if weights is None:
        log_mean = float(logsumexp(-r * values)) - math.log(values.size)
    else:
        log_mean = float(logsumexp(-r * values, b=weights))
    est = -log_mean / r
    mean, _ = gq_statistics(values, 1.0, weights)
    return est, r * (mean - est)


def loss_statistics(values: np.ndarray, loss: LossSpec, weights: Optional[np.ndarray] = None) -> Tuple[float, float]:
    if loss.kind == "gq":
        return gq_statistics(values, loss.value, weights)
    if loss.kind == "entropy":
        return entropy_statistics(values, loss.value, weights)
    return linex_statistics(values, loss.value, weights)


def expected_loss(
    values: np.ndarray,
    loss: LossSpec,
    estimate: float,
    weights: Optional[np.ndarray] = None,
) -> float:
    """Posterior expected loss of `estimate`; equals the posterior risk at the Bayes estimator."""
    values, weights = _normalized(values, weights)
    d = float(estimate)
    if loss.kind == "gq":
        return _expect(np.power(values, loss.value - 1.0) * (values - d) ** 2, weights)
    if loss.kind == "entropy":
        ratio = d / values
        return _expect(np.power(ratio, loss.value) - loss.value * np.log(ratio) - 1.0, weights)
    diff = loss.value * (d - values)
    return _expect(np.expm1(diff) - diff, weights)


def report_from_columns(columns: Mapping[str, Column], loss: LossSpec) -> BayesReport:
    """Apply `loss` to each parameter's (values, weights) column."""
    estimates: Dict[str, ParameterEstimate] = {}
    flags: List[str] = []
    for name in PARAMETER_NAMES:
        values, weights = columns[name]
        est, risk = loss_statistics(values, loss, weights)
        if risk < 0:
            flag = f"negative posterior risk {risk:.3g} for {name} under {loss.label}"
            flags.append(flag)
            logger.warning(flag)
        estimates[name] = ParameterEstimate(estimate=est, risk=risk)
    return BayesReport(estimates=estimates, loss=loss, flags=flags)


def draw_columns(draws: PosteriorDraws) -> Dict[str, Column]:
    return {name: (draws.column(name), None) for name in PARAMETER_NAMES}


def estimate(draws: PosteriorDraws, loss: LossSpec) -> BayesReport:
    return report_from_columns(draw_columns(draws), loss)


def estimate_gq(draws: PosteriorDraws, alpha: float) -> BayesReport:
    return estimate(draws, LossSpec.gq(alpha))


def estimate_entropy(draws: PosteriorDraws, p: float) -> BayesReport:
    return estimate(draws, LossSpec.entropy(p))


def estimate_linex(draws: PosteriorDraws, r: float) -> BayesReport:
    return estimate(draws, LossSpec.linex(r))
