"""
Competing-risk lifetime model B(eta0, eta1, beta) = min(Exponential(eta0), Weibull(eta1, beta)).

Evaluation of hazard, survival and density, inverse-CDF sampling, and the
right-censored log-likelihood. Everything is scale-parameterised: eta0 is the
exponential mean, eta1 the Weibull scale.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PARAMETER_NAMES: Tuple[str, str, str] = ("eta0", "eta1", "beta")

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Parameter triple of the B distribution."""
    eta0: float
    eta1: float
    beta: float

    def __post_init__(self) -> None:
        for name in PARAMETER_NAMES:
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a finite positive number, got {value!r}")

    @classmethod
    def from_sequence(cls, values: Iterable[float]) -> "ModelParams":
        eta0, eta1, beta = (float(v) for v in values)
        return cls(eta0=eta0, eta1=eta1, beta=beta)

    def as_array(self) -> np.ndarray:
        return np.array([self.eta0, self.eta1, self.beta], dtype=float)

    def to_dict(self) -> Dict[str, float]:
        return {"eta0": self.eta0, "eta1": self.eta1, "beta": self.beta}


class Event(IntEnum):
    """Observation flag; the integer value is the censoring indicator delta."""
    CENSORED = 0
    FAILURE = 1


@dataclass(frozen=True)
class Observation:
    time: float
    event: Event = Event.FAILURE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"observation time must be finite and >= 0, got {self.time!r}")
        object.__setattr__(self, "event", Event(self.event))

    @property
    def is_failure(self) -> bool:
        return self.event is Event.FAILURE


@dataclass(frozen=True)
class CensoredSample:
    """
    Right-censored sample with nondecreasing times.

    At least one failure is required; without one the likelihood is flat in
    beta and estimation is refused. `unchecked` skips that guard for prior-only
    sampling.
    """
    observations: Tuple[Observation, ...]
    times: np.ndarray = field(init=False, repr=False, compare=False)
    failures: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, observations: Iterable[Observation], require_failure: bool = True):
        obs = tuple(observations)
        times = np.array([o.time for o in obs], dtype=float)
        if times.size > 1 and np.any(np.diff(times) < 0):
            raise ValueError("observation times must be nondecreasing")
        failures = np.array([o.is_failure for o in obs], dtype=bool)
        if require_failure and not failures.any():
            raise ValueError("sample needs at least one failure observation")
        times.setflags(write=False)
        failures.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "failures", failures)

    @classmethod
    def from_arrays(cls, times: Sequence[float], events: Sequence[int]) -> "CensoredSample":
        """Build from parallel arrays; sorts by time (stable)."""
        times_arr = np.asarray(times, dtype=float)
        events_arr = np.asarray(events, dtype=int)
        if times_arr.shape != events_arr.shape:
            raise ValueError("times and events must have the same length")
        order = np.argsort(times_arr, kind="stable")
        return cls(Observation(float(times_arr[i]), Event(int(events_arr[i]))) for i in order)

    @classmethod
    def uncensored(cls, times: Sequence[float]) -> "CensoredSample":
        return cls.from_arrays(times, [1] * len(times))

    @classmethod
    def unchecked(cls, observations: Iterable[Observation]) -> "CensoredSample":
        return cls(observations, require_failure=False)

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def n_failures(self) -> int:
        return int(self.failures.sum())

    @property
    def n_censored(self) -> int:
        return len(self) - self.n_failures

    @property
    def events(self) -> np.ndarray:
        return self.failures.astype(int)

    def appended(self, observation: Observation) -> "CensoredSample":
        """Copy with one more observation, re-sorted."""
        times = np.append(self.times, observation.time)
        events = np.append(self.events, int(observation.event))
        return CensoredSample.from_arrays(times, events)

    def scaled(self, factor: float) -> "CensoredSample":
        if factor <= 0:
            raise ValueError("scale factor must be > 0")
        return CensoredSample.from_arrays(self.times * factor, self.events)

    def to_records(self) -> List[Dict[str, Any]]:
        return [{"time": o.time, "event": int(o.event)} for o in self.observations]


def _as_times(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("time must be finite and >= 0")
    return arr


def _scalar_or_array(values: np.ndarray, like: ArrayLike) -> Union[float, np.ndarray]:
    return float(values) if np.ndim(like) == 0 else values


def cause_hazards(params: ModelParams, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Cause-specific hazards (h_E, h_W) at x."""
    t = _as_times(x)
    if params.beta < 1 and np.any(t == 0):
        raise ValueError("hazard diverges at x = 0 when beta < 1")
    h_exp = np.full_like(t, 1.0 / params.eta0)
    h_weib = (params.beta / params.eta1) * np.power(t / params.eta1, params.beta - 1.0)
    return h_exp, h_weib


def hazard(params: ModelParams, x: ArrayLike) -> Union[float, np.ndarray]:
    h_exp, h_weib = cause_hazards(params, x)
    return _scalar_or_array(h_exp + h_weib, x)


def cumulative_hazard(params: ModelParams, x: ArrayLike) -> Union[float, np.ndarray]:
    t = _as_times(x)
    return _scalar_or_array(t / params.eta0 + np.power(t / params.eta1, params.beta), x)


def survival(params: ModelParams, x: ArrayLike) -> Union[float, np.ndarray]:
    return _scalar_or_array(np.exp(-np.asarray(cumulative_hazard(params, x))), x)


def pdf(params: ModelParams, x: ArrayLike) -> Union[float, np.ndarray]:
    h = np.asarray(hazard(params, x))
    s = np.asarray(survival(params, x))
    return _scalar_or_array(h * s, x)


def draw_from_uniforms(params: ModelParams, u_exp: ArrayLike, u_weib: ArrayLike) -> Union[float, np.ndarray]:
    """
    Inverse-CDF draw min(e, w) from a pair of uniforms in (0, 1].

    e = -eta0 * log(u_exp), w = eta1 * (-log(u_weib)) ** (1 / beta).
    """
    u1 = np.asarray(u_exp, dtype=float)
    u2 = np.asarray(u_weib, dtype=float)
    if np.any((u1 <= 0) | (u1 > 1)) or np.any((u2 <= 0) | (u2 > 1)):
        raise ValueError("uniforms must lie in (0, 1]")
    e = -params.eta0 * np.log(u1)
    w = params.eta1 * np.power(-np.log(u2), 1.0 / params.beta)
    return _scalar_or_array(np.minimum(e, w), u_exp)


def sample(params: ModelParams, rng: np.random.Generator) -> float:
    """One draw of B; consumes two uniforms from rng."""
    u = 1.0 - rng.random(2)
    return float(draw_from_uniforms(params, u[0], u[1]))


def sample_many(params: ModelParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """`size` draws; consumes the stream exactly as `size` calls to `sample` would."""
    if size < 1:
        raise ValueError("size must be >= 1")
    u = 1.0 - rng.random((size, 2))
    return np.asarray(draw_from_uniforms(params, u[:, 0], u[:, 1]))


def log_likelihood_arrays(
    eta0: float,
    eta1: float,
    beta: float,
    times: np.ndarray,
    failures: np.ndarray,
) -> float:
    """Censored log-likelihood on raw arrays; shared by the MLE and Bayesian paths."""
    ratio = times / eta1
    cumulative = times.sum() / eta0 + np.power(ratio, beta).sum()
    if not failures.any():
        return float(-cumulative)
    x_fail = times[failures]
    if beta < 1 and np.any(x_fail == 0):
        raise ValueError("hazard diverges at x = 0 when beta < 1")
    h = 1.0 / eta0 + (beta / eta1) * np.power(x_fail / eta1, beta - 1.0)
    if np.any(h <= 0):
        return -math.inf
    return float(np.log(h).sum() - cumulative)


def log_likelihood(params: ModelParams, sample: CensoredSample) -> float:
    """Right-censored log-likelihood, evaluated in log space."""
    return log_likelihood_arrays(params.eta0, params.eta1, params.beta, sample.times, sample.failures)
