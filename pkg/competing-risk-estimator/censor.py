"""
Fixed-percentage right censoring (type II).

The top round(n * fraction) order statistics are replaced by censored
observations at the last observed failure time.
"""
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from model import CensoredSample, Event, Observation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CensorScheme:
    fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"censor fraction must be in [0, 1), got {self.fraction!r}")

    def censored_count(self, n: int) -> int:
        """round(n * fraction), ties rounded half up on the decimal value."""
        exact = Decimal(repr(float(self.fraction))) * n
        return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))

    @property
    def percent(self) -> int:
        return int(Decimal(repr(float(self.fraction * 100))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def apply(times: Sequence[float], scheme: CensorScheme) -> CensoredSample:
    """Sort `times` and censor the largest ones at the r-th order statistic."""
    ordered = np.sort(np.asarray(times, dtype=float))
    n = ordered.size
    if n == 0:
        raise ValueError("cannot censor an empty sample")
    if np.any(~np.isfinite(ordered)) or ordered[0] < 0:
        raise ValueError("times must be finite and >= 0")

    n_censored = scheme.censored_count(n)
    r = n - n_censored
    if r < 1:
        raise ValueError(f"censor fraction {scheme.fraction} leaves no failure in a sample of {n}")

    cutoff = float(ordered[r - 1])
    observations = [Observation(float(t), Event.FAILURE) for t in ordered[:r]]
    observations.extend(Observation(cutoff, Event.CENSORED) for _ in range(n_censored))
    logger.debug(f"Censored {n_censored} of {n} observations at t={cutoff:.6g}")
    return CensoredSample(observations)
