"""
Deterministic posterior oracle by tensor-product Gauss-Legendre quadrature.

The scales are integrated in log coordinates, the shape over its prior support.
Every estimator needs only one-dimensional posterior expectations, so the grid
is reduced to marginal node weights per parameter and handed to the same
reductions the Monte-Carlo path uses.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import gamma

from mle import ConvergenceError
from model import PARAMETER_NAMES, CensoredSample

from .losses import BayesReport, Column, LossSpec, report_from_columns
from .prior import PriorSpec

logger = logging.getLogger(__name__)

NODE_COUNTS = (200, 300, 400)
COARSE_NODES = 96
SHRINK_PASSES = 2
MASS_CUTOFF = 1e-12
PRIOR_TAIL = 1e-15
DATA_MARGIN = math.log(1e3)
DEFAULT_RTOL = 1e-4
RECOMMENDED_MAX_N = 10

Interval = Tuple[float, float]


def _nodes(lo: float, hi: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and log-weights mapped onto [lo, hi]."""
    x, w = leggauss(count)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), np.log(w * half)


def _prior_log_range(rate: float, shape: float) -> Interval:
    lo = gamma.ppf(PRIOR_TAIL, shape, scale=1.0 / rate)
    hi = gamma.isf(PRIOR_TAIL, shape, scale=1.0 / rate)
    return math.log(max(lo, 1e-300)), math.log(hi)


def _widen(box: Interval, other: Interval) -> Interval:
    return min(box[0], other[0]), max(box[1], other[1])


@dataclass
class PosteriorGrid:
    """Marginal posterior node weights for eta0, eta1 and beta."""
    columns: Dict[str, Column]
    boxes: Dict[str, Interval]
    nodes: int
    log_evidence: float

    @classmethod
    def build(
        cls,
        sample: CensoredSample,
        prior: PriorSpec,
        nodes: int,
        boxes: Optional[Dict[str, Interval]] = None,
    ) -> "PosteriorGrid":
        if nodes < 2:
            raise ValueError("need at least two quadrature nodes per axis")
        times = sample.times
        x_fail = times[sample.failures]
        if prior.beta_l < 1 and np.any(x_fail <= 0):
            raise ValueError("failure at time 0 makes the posterior improper when beta_l < 1")
        boxes = boxes or default_boxes(sample, prior)

        u0, lw0 = _nodes(*boxes["eta0"], nodes)
        u1, lw1 = _nodes(*boxes["eta1"], nodes)
        betas, lwb = _nodes(*boxes["beta"], nodes)
        eta0, eta1 = np.exp(u0), np.exp(u1)
        total_time = float(times.sum())

        # prior kernel times the log-scale Jacobian, plus the exponential survival term
        part0 = prior.b1 * u0 - prior.a1 * eta0 - total_time / eta0 + lw0
        part1_base = prior.b2 * u1 - prior.a2 * eta1 + lw1
        h0 = (1.0 / eta0)[:, None]

        slice_max = np.empty(nodes)
        marg0 = np.empty((nodes, nodes))
        marg1 = np.empty((nodes, nodes))
        margb = np.empty(nodes)
        for k, beta in enumerate(betas):
            ratio = times[:, None] / eta1[None, :]
            part1 = part1_base - np.power(ratio, beta).sum(axis=0)
            grid = part0[:, None] + part1[None, :] + lwb[k]
            for x in x_fail:
                hw = (beta / eta1) * np.power(x / eta1, beta - 1.0)
                grid += np.log(h0 + hw[None, :])
            peak = grid.max()
            dense = np.exp(grid - peak)
            slice_max[k] = peak
            marg0[k] = dense.sum(axis=1)
            marg1[k] = dense.sum(axis=0)
            margb[k] = dense.sum()

        if not np.isfinite(slice_max).any():
            raise ConvergenceError("posterior kernel is not finite anywhere on the grid")
        top = slice_max.max()
        scale = np.exp(slice_max - top)
        w0 = scale @ marg0
        w1 = scale @ marg1
        wb = scale * margb
        log_evidence = top + math.log(wb.sum())
        columns = {"eta0": (eta0, w0), "eta1": (eta1, w1), "beta": (betas, wb)}
        return cls(columns=columns, boxes=dict(boxes), nodes=nodes, log_evidence=log_evidence)

    def shrunk(self) -> Dict[str, Interval]:
        """Scale boxes trimmed to the nodes holding at least MASS_CUTOFF of the mass."""
        out = dict(self.boxes)
        for name in ("eta0", "eta1"):
            values, weights = self.columns[name]
            share = weights / weights.sum()
            keep = np.flatnonzero(share >= MASS_CUTOFF)
            logs = np.log(values)
            lo_index = max(keep[0] - 1, 0)
            hi_index = min(keep[-1] + 1, logs.size - 1)
            lo = self.boxes[name][0] if lo_index == 0 else float(logs[lo_index])
            hi = self.boxes[name][1] if hi_index == logs.size - 1 else float(logs[hi_index])
            out[name] = (lo, hi)
        return out

    def report(self, loss: LossSpec) -> BayesReport:
        return report_from_columns(self.columns, loss)


def default_boxes(sample: CensoredSample, prior: PriorSpec) -> Dict[str, Interval]:
    """Log-scale boxes covering the prior bulk and the range of the data."""
    positive = sample.times[sample.times > 0]
    if positive.size:
        data_box = (math.log(positive.min()) - DATA_MARGIN, math.log(positive.max()) + DATA_MARGIN)
    else:
        data_box = (-DATA_MARGIN, DATA_MARGIN)
    return {
        "eta0": _widen(_prior_log_range(prior.a1, prior.b1), data_box),
        "eta1": _widen(_prior_log_range(prior.a2, prior.b2), data_box),
        "beta": (prior.beta_l, prior.beta_r),
    }


def locate_mass(sample: CensoredSample, prior: PriorSpec) -> Dict[str, Interval]:
    boxes = default_boxes(sample, prior)
    for _ in range(SHRINK_PASSES):
        boxes = PosteriorGrid.build(sample, prior, COARSE_NODES, boxes).shrunk()
    logger.debug(f"quadrature boxes (log eta0, log eta1, beta): {boxes}")
    return boxes


def _relative_change(new: Sequence[BayesReport], old: Sequence[BayesReport]) -> float:
    worst = 0.0
    for a_report, b_report in zip(new, old):
        for name in PARAMETER_NAMES:
            a, b = a_report.estimate_of(name), b_report.estimate_of(name)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst


def quadrature_reports(
    sample: CensoredSample,
    prior: PriorSpec,
    losses: Sequence[LossSpec],
    node_counts: Sequence[int] = NODE_COUNTS,
    rtol: float = DEFAULT_RTOL,
) -> List[BayesReport]:
    """
    Bayes estimates and risks by quadrature for several losses, refined until
    successive node counts agree to `rtol` on every estimate.
    """
    if not losses:
        raise ValueError("need at least one loss")
    if len(node_counts) < 2:
        raise ValueError("refinement needs at least two node counts")
    if len(sample) > RECOMMENDED_MAX_N:
        logger.warning(f"quadrature oracle on n={len(sample)}; intended for samples of {RECOMMENDED_MAX_N} or fewer")
    boxes = locate_mass(sample, prior)
    previous: Optional[List[BayesReport]] = None
    change = math.inf
    for count in node_counts:
        grid = PosteriorGrid.build(sample, prior, count, boxes)
        current = [grid.report(loss) for loss in losses]
        if previous is not None:
            change = _relative_change(current, previous)
            logger.debug(f"quadrature {count} nodes: relative change {change:.3g}")
            if change < rtol:
                return current
        previous = current
    labels = ", ".join(loss.label for loss in losses)
    raise ConvergenceError(f"quadrature did not stabilise for {labels}: last relative change {change:.3g} > {rtol}")


def quadrature_oracle(
    sample: CensoredSample,
    prior: PriorSpec,
    loss: LossSpec,
    node_counts: Sequence[int] = NODE_COUNTS,
    rtol: float = DEFAULT_RTOL,
) -> BayesReport:
    return quadrature_reports(sample, prior, [loss], node_counts, rtol)[0]
