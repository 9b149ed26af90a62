"""
Monte-Carlo replication harness for the estimator-comparison studies.

Each replication i draws its data from
SeedSequence(entropy=master_seed, spawn_key=(i, 0)) and its MH chain from
spawn_key (i, 1), so results do not depend on the worker count or on the
order in which replications finish. Every (n, censoring) cell reuses the same
replication seeds.
"""
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from bayes import BayesReport, LossSpec, MhConfig, PosteriorDraws, PriorSpec, estimate, mh_sample
from censor import apply as apply_censoring
from config import SimConfig
from evaluation import ReplicationSet, curve_table, imse, pitman_probability
from mle import NO_EXPONENTIAL, NO_WEIBULL, ConvergenceError, em_fit
from model import PARAMETER_NAMES, CensoredSample, ModelParams, sample_many

logger = logging.getLogger(__name__)

DATA_STREAM = 0
CHAIN_STREAM = 1
MLE_LABEL = "mle"
BOUNDARY_LABEL = "mle_boundary"

Sampler = Callable[[CensoredSample, PriorSpec, MhConfig], PosteriorDraws]


def replication_seed(master_seed: int, index: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index, stream))


def chain_seed(master_seed: int, index: int) -> int:
    return int(replication_seed(master_seed, index, CHAIN_STREAM).generate_state(1)[0])


def simulate_replication(config: SimConfig, index: int) -> CensoredSample:
    """The censored dataset of replication `index`."""
    rng = np.random.default_rng(replication_seed(config.master_seed, index, DATA_STREAM))
    times = sample_many(config.truth, rng, config.n)
    return apply_censoring(times, config.censor)


def dataset_digest(sample: CensoredSample) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(sample.times, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(sample.events, dtype="<i1").tobytes())
    return h.hexdigest()


@dataclass
class ReplicationOutcome:
    index: int
    digest: str
    mle: Optional[ModelParams] = None
    mle_boundary: Optional[str] = None
    bayes: Dict[str, BayesReport] = field(default_factory=dict)
    acceptance_rate: Optional[float] = None
    errors: Dict[str, str] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def succeeded(self, label: str) -> bool:
        if label == MLE_LABEL:
            return self.mle is not None
        return label in self.bayes

    def estimate_for(self, label: str) -> ModelParams:
        if label == MLE_LABEL:
            return self.mle
        report = self.bayes[label]
        return ModelParams.from_sequence(report.estimate_of(name) for name in PARAMETER_NAMES)


def default_sampler() -> Sampler:
    return partial(mh_sample, keep_chain=False)


def run_replication(
    config: SimConfig,
    index: int,
    fit_mle: bool,
    losses: Sequence[LossSpec],
    sampler: Optional[Sampler] = None,
) -> ReplicationOutcome:
    sample = simulate_replication(config, index)
    outcome = ReplicationOutcome(index=index, digest=dataset_digest(sample))

    if fit_mle:
        try:
            report = em_fit(sample, truth=config.truth)
        except (ValueError, ConvergenceError) as exc:
            outcome.errors[MLE_LABEL] = str(exc)
        else:
            if report.boundary is not None:
                outcome.mle_boundary = report.boundary
                outcome.errors[MLE_LABEL] = f"boundary fit ({report.boundary})"
            elif report.converged:
                outcome.mle = report.params
            else:
                outcome.errors[MLE_LABEL] = "; ".join(report.warnings) or "EM did not converge"

    if losses:
        sampler = sampler or default_sampler()
        mh = replace(config.mh, seed=chain_seed(config.master_seed, index))
        try:
            draws = sampler(sample, config.prior, mh)
        except (ValueError, ConvergenceError) as exc:
            for loss in losses:
                outcome.errors[loss.label] = str(exc)
        else:
            outcome.acceptance_rate = draws.acceptance_rate
            outcome.warnings.extend(draws.warnings)
            for loss in losses:
                try:
                    outcome.bayes[loss.label] = estimate(draws, loss)
                except ValueError as exc:
                    outcome.errors[loss.label] = str(exc)
    return outcome


def _run_all(
    config: SimConfig,
    fit_mle: bool,
    losses: Sequence[LossSpec],
    sampler: Optional[Sampler],
    desc: str,
) -> List[ReplicationOutcome]:
    job = partial(run_replication, config, fit_mle=fit_mle, losses=list(losses), sampler=sampler)
    indices = range(config.replications)
    progress = dict(total=config.replications, desc=desc, disable=not config.progress)
    if config.workers == 1:
        return list(tqdm(map(job, indices), **progress))
    chunksize = max(1, config.replications // (config.workers * 8))
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(tqdm(pool.map(job, indices, chunksize=chunksize), **progress))


@dataclass
class StudyResult:
    study: str
    config: SimConfig
    outcomes: List[ReplicationOutcome]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    excluded: Dict[str, int] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    findings: Dict[str, Any] = field(default_factory=dict)

    @property
    def digests(self) -> List[str]:
        return [o.digest for o in self.outcomes]

    def replication_set(self, label: str, indices: Optional[Iterable[int]] = None) -> ReplicationSet:
        """Estimates of one estimator over the given replication indices (default: all successes)."""
        chosen = [o for o in self.outcomes if o.succeeded(label)]
        if indices is not None:
            wanted = set(indices)
            chosen = [o for o in chosen if o.index in wanted]
        return ReplicationSet([o.estimate_for(label) for o in chosen], self.config.truth, label)

    def table_names(self) -> List[str]:
        return list(self.tables)

    def to_json(self) -> Dict[str, Any]:
        cfg = self.config
        return {
            "study": self.study,
            "n": cfg.n,
            "censor_fraction": cfg.censor.fraction,
            "replications": cfg.replications,
            "master_seed": cfg.master_seed,
            "truth": cfg.truth.to_dict(),
            "prior": cfg.prior.to_dict(),
            "excluded": dict(self.excluded),
            "warnings": list(self.warnings),
            "findings": self.findings,
            "digests": self.digests,
        }


def _collect_warnings(outcomes: Sequence[ReplicationOutcome], labels: Sequence[str]) -> Dict[str, Any]:
    excluded = {label: sum(not o.succeeded(label) for o in outcomes) for label in labels}
    if MLE_LABEL in excluded:
        boundary = sum(o.mle_boundary is not None for o in outcomes)
        excluded[MLE_LABEL] -= boundary
        excluded[BOUNDARY_LABEL] = boundary
    warnings: List[str] = []
    for label, count in excluded.items():
        if count:
            message = f"{label}: excluded {count} of {len(outcomes)} replications"
            warnings.append(message)
            logger.warning(message)
    mh_warned = sum(bool(o.warnings) for o in outcomes)
    if mh_warned:
        message = f"MH acceptance outside band in {mh_warned} of {len(outcomes)} replications"
        warnings.append(message)
        logger.warning(message)
    return {"excluded": excluded, "warnings": warnings}


def boundary_findings(outcomes: Sequence[ReplicationOutcome]) -> Dict[str, int]:
    """Boundary EM fits per edge (see mle.boundary_edge)."""
    counts: Dict[str, int] = {NO_EXPONENTIAL: 0, NO_WEIBULL: 0}
    for o in outcomes:
        if o.mle_boundary is not None:
            counts[o.mle_boundary] += 1
    return counts


def _cell_columns(config: SimConfig) -> Dict[str, Any]:
    return {"n": config.n, "censor_pct": config.censor.percent}


def mle_table(result: StudyResult) -> pd.DataFrame:
    """Mean EM estimate with mean per-replication squared error and squared error of the mean."""
    cfg = result.config
    rows = []
    reps = [o for o in result.outcomes if o.mle is not None]
    for name in PARAMETER_NAMES:
        truth = getattr(cfg.truth, name)
        values = np.array([getattr(o.mle, name) for o in reps], dtype=float)
        mean = float(values.mean()) if values.size else float("nan")
        rows.append({
            **_cell_columns(cfg),
            "parameter": name,
            "truth": truth,
            "mean_estimate": mean,
            "mse": float(np.mean((values - truth) ** 2)) if values.size else float("nan"),
            "qe_of_mean": (mean - truth) ** 2,
            "count": int(values.size),
            "excluded": result.excluded.get(MLE_LABEL, 0),
            "boundary": result.excluded.get(BOUNDARY_LABEL, 0),
        })
    return pd.DataFrame(rows)


def bayes_table(result: StudyResult, losses: Sequence[LossSpec]) -> pd.DataFrame:
    """Mean Bayes estimate and mean posterior risk per loss and parameter."""
    cfg = result.config
    rows = []
    for loss in losses:
        reports = [o.bayes[loss.label] for o in result.outcomes if loss.label in o.bayes]
        for name in PARAMETER_NAMES:
            est = np.array([r.estimate_of(name) for r in reports], dtype=float)
            risk = np.array([r.risk_of(name) for r in reports], dtype=float)
            rows.append({
                **_cell_columns(cfg),
                "loss": loss.kind,
                "loss_parameter": loss.value,
                "parameter": name,
                "mean_estimate": float(est.mean()) if est.size else float("nan"),
                "mean_risk": float(risk.mean()) if risk.size else float("nan"),
                "count": int(est.size),
                "excluded": result.excluded.get(loss.label, 0),
            })
    return pd.DataFrame(rows)


def run_mle_study(config: SimConfig) -> StudyResult:
    config.validate()
    logger.info(f"MLE study n={config.n} censoring={config.censor.percent}% replications={config.replications}")
    outcomes = _run_all(config, True, [], None, f"mle n={config.n}")
    result = StudyResult("mle", config, outcomes, **_collect_warnings(outcomes, [MLE_LABEL]))
    result.findings["boundary_fits"] = boundary_findings(outcomes)
    result.tables["mle"] = mle_table(result)
    return result


def run_bayes_study(config: SimConfig, sampler: Optional[Sampler] = None) -> StudyResult:
    config.validate()
    if not config.losses:
        raise ValueError("Bayes study needs at least one loss")
    logger.info(f"Bayes study n={config.n} censoring={config.censor.percent}% replications={config.replications}")
    outcomes = _run_all(config, False, config.losses, sampler, f"bayes n={config.n}")
    labels = [loss.label for loss in config.losses]
    result = StudyResult("bayes", config, outcomes, **_collect_warnings(outcomes, labels))
    result.tables["bayes"] = bayes_table(result, config.losses)
    return result


def run_comparison(config: SimConfig, sampler: Optional[Sampler] = None) -> StudyResult:
    """
    MLE against the Bayes estimators on identical datasets.

    Only replications where every estimator succeeded enter the Pitman and
    IMSE tables.
    """
    config.validate()
    losses = config.comparison_losses
    if not losses:
        raise ValueError("comparison study needs at least one comparison loss")
    logger.info(f"Comparison study n={config.n} censoring={config.censor.percent}% replications={config.replications}")
    outcomes = _run_all(config, True, losses, sampler, f"compare n={config.n}")
    labels = [MLE_LABEL] + [loss.label for loss in losses]
    result = StudyResult("compare", config, outcomes, **_collect_warnings(outcomes, labels))
    result.findings["boundary_fits"] = boundary_findings(outcomes)

    paired = [o.index for o in outcomes if all(o.succeeded(label) for label in labels)]
    result.findings["paired_replications"] = len(paired)
    result.tables["baseline"] = mle_table(result)
    result.tables["best"] = bayes_table(result, losses)
    if not paired:
        message = "no replication succeeded for every estimator; Pitman and IMSE tables are empty"
        result.warnings.append(message)
        logger.warning(message)
        return result

    sets = {label: result.replication_set(label, paired) for label in labels}
    result.tables["pitman"] = pitman_table(config, sets)
    imse_frame = imse_table(config, sets)
    result.tables["imse"] = imse_frame
    result.findings.update(imse_findings(imse_frame))
    result.tables["curves"] = curves_for(config, sets, losses)
    return result


def pitman_table(config: SimConfig, sets: Dict[str, ReplicationSet]) -> pd.DataFrame:
    """Probability that `estimator` is strictly closer than `versus`, for every ordered pair."""
    rows = []
    for a_label, a in sets.items():
        for b_label, b in sets.items():
            if a_label == b_label:
                continue
            row = {**_cell_columns(config), "estimator": a_label, "versus": b_label}
            for name in PARAMETER_NAMES:
                row[name] = pitman_probability(a, b, name)
            rows.append(row)
    return pd.DataFrame(rows)


def imse_table(config: SimConfig, sets: Dict[str, ReplicationSet]) -> pd.DataFrame:
    rows = []
    for label, reps in sets.items():
        row = {**_cell_columns(config), "estimator": label}
        for name in PARAMETER_NAMES:
            row[name] = imse(reps, name)
        rows.append(row)
    return pd.DataFrame(rows)


def imse_findings(table: pd.DataFrame) -> Dict[str, Any]:
    """Whether the best Bayes estimator beats the MLE in IMSE, per parameter."""
    indexed = table.set_index("estimator")
    bayes_rows = indexed.drop(index=MLE_LABEL)
    findings: Dict[str, Any] = {"bayes_better": {}, "best_bayes": {}}
    for name in PARAMETER_NAMES:
        best = str(bayes_rows[name].idxmin())
        findings["best_bayes"][name] = best
        findings["bayes_better"][name] = bool(bayes_rows[name].min() < indexed.loc[MLE_LABEL, name])
    return findings


def curves_for(config: SimConfig, sets: Dict[str, ReplicationSet], losses: Sequence[LossSpec]) -> pd.DataFrame:
    """Survival and hazard of the truth, the mean MLE and the mean entropy (or first) Bayes estimate."""
    pick = next((loss for loss in losses if loss.kind == "entropy" and loss.value == -1.0), losses[0])
    labelled = {
        "truth": config.truth,
        MLE_LABEL: sets[MLE_LABEL].mean(),
        f"bayes_{pick.kind}": sets[pick.label].mean(),
    }
    return curve_table(labelled)


STUDY_RUNNERS: Dict[str, Callable[..., StudyResult]] = {
    "mle": run_mle_study,
    "bayes": run_bayes_study,
    "compare": run_comparison,
}


def run_study(study: str, cells: Sequence[SimConfig], sampler: Optional[Sampler] = None) -> List[StudyResult]:
    """Run one study over every cell, in order."""
    if study not in STUDY_RUNNERS:
        raise ValueError(f"unknown study {study!r}; expected one of {sorted(STUDY_RUNNERS)}")
    runner = STUDY_RUNNERS[study]
    results = []
    for cell in cells:
        result = runner(cell) if study == "mle" else runner(cell, sampler=sampler)
        results.append(result)
    return results
