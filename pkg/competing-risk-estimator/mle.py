"""
Maximum-likelihood estimation of B(eta0, eta1, beta) with the EM algorithm.

The failure cause of each observation is the latent label. The E-step assigns
each failure the probability that it came from the exponential cause; the
M-step maximizes the expected complete-data log-likelihood separately for the
exponential part (closed form) and the Weibull part (Newton-Raphson in
log-parameter coordinates with step halving).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from evaluation import quadratic_error
from model import (
    CensoredSample,
    ModelParams,
    cause_hazards,
    log_likelihood,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
NEWTON_GTOL = 1e-8
NEWTON_MAX_ITER = 100
MAX_HALVINGS = 60
DEFAULT_INIT_BETA = 1.2

# Labels of the two edges of the parameter space, named by the cause that vanishes.
NO_EXPONENTIAL = "no_exponential"
NO_WEIBULL = "no_weibull"
# A fit within this much log-likelihood of an edge supremum is a boundary fit.
BOUNDARY_LL_TOL = 1e-4

# log(beta) is kept inside this box; log(eta1) within LOG_SCALE_MARGIN of the log-times.
LOG_SHAPE_BOUNDS = (math.log(1e-2), math.log(1e2))
LOG_SCALE_MARGIN = 30.0


class ConvergenceError(RuntimeError):
    """Raised when a numerical procedure ends without a usable result."""


@dataclass
class Memberships:
    """
    Probability that each observation's failure came from the exponential cause.

    Censored entries hold 0 and carry no hazard term.
    """
    p_exp: np.ndarray

    def __post_init__(self) -> None:
        self.p_exp = np.asarray(self.p_exp, dtype=float)
        if np.any((self.p_exp < 0) | (self.p_exp > 1)) or np.any(~np.isfinite(self.p_exp)):
            raise ValueError("membership probabilities must lie in [0, 1]")

    @property
    def p_weibull(self) -> np.ndarray:
        return 1.0 - self.p_exp


@dataclass
class NewtonResult:
    eta1: float
    beta: float
    iterations: int
    converged: bool
    gradient_norm: float
    objective: float


@dataclass
class EmReport:
    params: ModelParams
    iterations: int
    loglik_trace: List[float]
    converged: bool
    quadratic_error: Optional[Dict[str, float]] = None
    warnings: List[str] = field(default_factory=list)
    boundary: Optional[str] = None

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self) -> Dict[str, object]:
        return {
            "params": self.params.to_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary": self.boundary,
            "quadratic_error": self.quadratic_error,
            "warnings": list(self.warnings),
        }


def _check_sample(sample: CensoredSample, memberships: Memberships) -> None:
    if memberships.p_exp.shape != sample.times.shape:
        raise ValueError("memberships do not match the sample length")


def e_step(params: ModelParams, sample: CensoredSample) -> Memberships:
    h_exp, h_weib = cause_hazards(params, sample.times)
    p_exp = np.where(sample.failures, h_exp / (h_exp + h_weib), 0.0)
    return Memberships(p_exp)


def q_function(params: ModelParams, memberships: Memberships, sample: CensoredSample) -> float:
    """Expected complete-data log-likelihood given the memberships."""
    _check_sample(sample, memberships)
    h_exp, h_weib = cause_hazards(params, sample.times)
    fail = sample.failures
    p = memberships.p_exp[fail]
    with np.errstate(divide="ignore"):
        log_he = np.log(h_exp[fail])
        log_hw = np.log(h_weib[fail])
    hazard_terms = np.where(p > 0, p * log_he, 0.0) + np.where(p < 1, (1.0 - p) * log_hw, 0.0)
    if np.any(np.isneginf(hazard_terms)):
        return -math.inf
    survival_terms = -(sample.times / params.eta0) - np.power(sample.times / params.eta1, params.beta)
    return float(hazard_terms.sum() + survival_terms.sum())


def m_step_exponential(memberships: Memberships, sample: CensoredSample) -> float:
    """eta0 = (sum of all times) / (sum of exponential memberships)."""
    _check_sample(sample, memberships)
    mass = float(memberships.p_exp[sample.failures].sum())
    if mass <= 0:
        raise ValueError("no membership mass on the exponential cause")
    total = float(sample.times.sum())
    if total <= 0:
        raise ValueError("total time on test must be > 0")
    return total / mass


class WeibullQPart:
    """
    Weibull part of the Q-function in x = (log eta1, log beta):

        F = sum_fail w_i log h_W(x_i) - sum_all (x_i / eta1) ** beta,  w_i = 1 - p_exp.
    """

    def __init__(self, memberships: Memberships, sample: CensoredSample):
        _check_sample(sample, memberships)
        fail = sample.failures
        weights = memberships.p_weibull[fail]
        if not np.any(weights > 0):
            raise ValueError("no membership mass on the Weibull cause")
        positive = weights > 0
        if np.any(sample.times[fail][positive] <= 0):
            raise ValueError("Weibull M-step needs strictly positive failure times")
        self.weights = weights[positive]
        self.log_fail = np.log(sample.times[fail][positive])
        self.total_weight = float(self.weights.sum())
        self.weighted_log_sum = float(np.dot(self.weights, self.log_fail))
        self.log_all = np.log(sample.times[sample.times > 0])
        lo = float(self.log_all.min()) - LOG_SCALE_MARGIN
        hi = float(self.log_all.max()) + LOG_SCALE_MARGIN
        self.lower = np.array([lo, LOG_SHAPE_BOUNDS[0]])
        self.upper = np.array([hi, LOG_SHAPE_BOUNDS[1]])

    def _terms(self, x: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        beta = math.exp(x[1])
        z = beta * (self.log_all - x[0])
        with np.errstate(over="ignore"):
            t = np.exp(z)
        return beta, z, t

    def value(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        beta, _, t = self._terms(x)
        w, u, v = self.total_weight, x[0], x[1]
        return float(w * v + (beta - 1.0) * self.weighted_log_sum - beta * u * w - t.sum())

    def gradient(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        beta, z, t = self._terms(x)
        s = t.sum()
        w, u = self.total_weight, x[0]
        g_u = beta * (s - w)
        g_v = w + beta * (self.weighted_log_sum - u * w) - float(np.dot(t, z))
        return np.array([g_u, g_v])

    def hessian(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        beta, z, t = self._terms(x)
        s = t.sum()
        tz = float(np.dot(t, z))
        w, u = self.total_weight, x[0]
        h_uu = -beta * beta * s
        h_uv = beta * (s - w) + beta * tz
        h_vv = beta * (self.weighted_log_sum - u * w) - float(np.dot(t, z * (z + 1.0)))
        return np.array([[h_uu, h_uv], [h_uv, h_vv]])

    def free_mask(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Coordinates not pinned at a bound by an outward-pointing gradient."""
        at_lower = (x <= self.lower) & (g < 0)
        at_upper = (x >= self.upper) & (g > 0)
        return ~(at_lower | at_upper)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


def _ascent_direction(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """
    Newton direction when the Hessian is negative definite.

    Otherwise the Hessian is shifted down until its largest eigenvalue is -1, which
    keeps the curvature of the sharp directions and follows flat ones along the gradient.
    """
    try:
        eigenvalues = np.linalg.eigvalsh(h)
        if np.all(eigenvalues < 0):
            step = -np.linalg.solve(h, g)
            if np.all(np.isfinite(step)) and float(np.dot(step, g)) > 0:
                return step
        shift = float(eigenvalues.max()) + 1.0
        step = -np.linalg.solve(h - shift * np.eye(len(g)), g)
        if np.all(np.isfinite(step)):
            logger.debug(f"Singular or indefinite Hessian, shifted by {shift:.3g}")
            return step
    except np.linalg.LinAlgError:
        pass
    logger.debug("Hessian unusable, taking a gradient step")
    return g / max(1.0, float(np.abs(g).max()))


def solve_weibull_m_step(
    memberships: Memberships,
    sample: CensoredSample,
    init: Tuple[float, float],
    gtol: float = NEWTON_GTOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> NewtonResult:
    """Newton-Raphson on the Weibull Q-part; never returns a worse point than `init`."""
    eta1, beta = init
    if eta1 <= 0 or beta <= 0:
        raise ValueError("initial eta1 and beta must be > 0")
    part = WeibullQPart(memberships, sample)
    x = part.clip(np.array([math.log(eta1), math.log(beta)]))
    fx = part.value(x)
    converged = False
    g_norm = math.inf
    iterations = 0

    for iterations in range(1, max_iter + 1):
        g = part.gradient(x)
        free = part.free_mask(x, g)
        g_norm = float(np.abs(g[free]).max()) if free.any() else 0.0
        if g_norm < gtol:
            converged = True
            break

        step = np.zeros(2)
        idx = np.flatnonzero(free)
        step[idx] = _ascent_direction(g[idx], part.hessian(x)[np.ix_(idx, idx)])

        accepted = False
        for halving in range(MAX_HALVINGS):
            candidate = part.clip(x + step)
            fc = part.value(candidate)
            if math.isfinite(fc) and fc >= fx:
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            logger.debug(f"Newton step halving exhausted at iteration {iterations}")
            break
        if halving:
            logger.debug(f"Newton step halved {halving} time(s) at iteration {iterations}")
        if np.array_equal(candidate, x):
            break
        x, fx = candidate, fc

    if not converged:
        logger.debug(f"Weibull M-step stopped without convergence (|grad|={g_norm:.3g})")
    return NewtonResult(
        eta1=math.exp(x[0]),
        beta=math.exp(x[1]),
        iterations=iterations,
        converged=converged,
        gradient_norm=g_norm,
        objective=fx,
    )


def m_step_weibull(
    memberships: Memberships,
    sample: CensoredSample,
    init: Tuple[float, float],
) -> Tuple[float, float]:
    result = solve_weibull_m_step(memberships, sample, init)
    if not result.converged:
        logger.warning(
            f"Weibull M-step did not converge after {result.iterations} iterations "
            f"(|grad|={result.gradient_norm:.3g}); using best iterate"
        )
    return result.eta1, result.beta


def default_init(sample: CensoredSample) -> ModelParams:
    """Overdispersed start: eta0 = 2 * mean, eta1 = median, beta = 1.2."""
    times = sample.times
    if float(times.mean()) <= 0:
        raise ValueError("cannot initialise from a sample whose times are all zero")
    median = float(np.median(times))
    if median <= 0:
        median = float(times[times > 0].min())
    return ModelParams(eta0=2.0 * float(times.mean()), eta1=median, beta=DEFAULT_INIT_BETA)


def edge_log_likelihoods(sample: CensoredSample, weibull_init: Tuple[float, float]) -> Dict[str, float]:
    """
    Suprema of the log-likelihood on the two edges where one cause vanishes.

    eta0 -> infinity leaves a censored Weibull fit; a vanishing Weibull cause
    leaves the exponential fit with eta0 = total time / failures.
    """
    failures = sample.n_failures
    total = float(sample.times.sum())
    no_weibull = failures * math.log(failures / total) - failures
    weibull = solve_weibull_m_step(Memberships(np.zeros(len(sample))), sample, weibull_init)
    return {NO_EXPONENTIAL: weibull.objective, NO_WEIBULL: no_weibull}


def boundary_edge(sample: CensoredSample, params: ModelParams, log_lik: float) -> Optional[str]:
    """The edge whose supremum a fit only matches, or None for an interior maximum."""
    edges = edge_log_likelihoods(sample, (params.eta1, params.beta))
    edge = max(edges, key=edges.get)
    if edges[edge] >= log_lik - BOUNDARY_LL_TOL:
        return edge
    return None


def em_fit(
    sample: CensoredSample,
    init: Optional[ModelParams] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    truth: Optional[ModelParams] = None,
) -> EmReport:
    """
    Run EM until the observed log-likelihood changes by less than `tol`.

    Non-convergence is flagged in the report and the best iterate returned. When
    the best iterate only matches the likelihood supremum of an edge where one
    cause vanishes, `boundary` names that edge; EM then drifts without reaching a
    finite maximum.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if np.any(sample.times[sample.failures] <= 0):
        raise ValueError("EM needs strictly positive failure times")

    params = init if init is not None else default_init(sample)
    current = log_likelihood(params, sample)
    if not math.isfinite(current):
        raise ConvergenceError(f"log-likelihood is not finite at the initial point {params}")
    trace = [current]
    best, best_ll = params, current
    converged = False
    warnings: List[str] = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        memberships = e_step(params, sample)
        eta0 = m_step_exponential(memberships, sample)
        if np.any(memberships.p_weibull[sample.failures] > 0):
            weibull = solve_weibull_m_step(memberships, sample, (params.eta1, params.beta))
            eta1, beta = weibull.eta1, weibull.beta
        else:
            # no failure mass left on the Weibull cause; keep its current pair
            eta1, beta = params.eta1, params.beta
        params = ModelParams(eta0=eta0, eta1=eta1, beta=beta)
        updated = log_likelihood(params, sample)
        trace.append(updated)
        logger.debug(f"EM iteration {iterations}: loglik={updated:.12g} params={params}")

        if not math.isfinite(updated):
            break
        if updated < current - 1e-10:
            logger.warning(f"EM log-likelihood decreased by {current - updated:.3g} at iteration {iterations}")
        if updated > best_ll:
            best, best_ll = params, updated
        if abs(updated - current) < tol:
            converged = True
            break
        current = updated

    if not math.isfinite(best_ll):
        raise ConvergenceError("EM produced no finite log-likelihood")
    boundary = boundary_edge(sample, best, best_ll)
    if boundary is not None:
        message = f"likelihood supremum lies on the {boundary} edge"
        warnings.append(message)
        logger.debug(f"{message} (loglik={best_ll:.12g}, params={best})")
    if not converged:
        message = f"EM did not converge in {iterations} iterations"
        warnings.append(message)
        if boundary is None:
            logger.warning(message)

    return EmReport(
        params=best,
        iterations=iterations,
        loglik_trace=trace,
        converged=converged,
        quadratic_error=quadratic_error(best, truth) if truth is not None else None,
        warnings=warnings,
        boundary=boundary,
    )
