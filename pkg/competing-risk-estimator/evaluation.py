"""
Estimator comparison metrics: Pitman closeness, IMSE, quadratic error and
survival/hazard curve tables.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from model import PARAMETER_NAMES, ModelParams, hazard, survival

logger = logging.getLogger(__name__)

CURVE_GRID_START = 1.0
CURVE_GRID_STOP = 50.0
CURVE_GRID_POINTS = 50


@dataclass
class ReplicationSet:
    """Estimates from Monte-Carlo replications of one estimator, plus the truth."""
    estimates: List[ModelParams]
    truth: ModelParams
    label: str = ""

    def __post_init__(self) -> None:
        if not self.estimates:
            raise ValueError("replication set is empty")

    def __len__(self) -> int:
        return len(self.estimates)

    @classmethod
    def from_array(cls, values: np.ndarray, truth: ModelParams, label: str = "") -> "ReplicationSet":
        return cls([ModelParams.from_sequence(row) for row in np.asarray(values, dtype=float)], truth, label)

    def values(self, parameter: str) -> np.ndarray:
        _check_parameter(parameter)
        return np.array([getattr(e, parameter) for e in self.estimates], dtype=float)

    def target(self, parameter: str) -> float:
        _check_parameter(parameter)
        return float(getattr(self.truth, parameter))

    def mean(self) -> ModelParams:
        return ModelParams.from_sequence(np.mean([e.as_array() for e in self.estimates], axis=0))


def _check_parameter(parameter: str) -> None:
    if parameter not in PARAMETER_NAMES:
        raise ValueError(f"unknown parameter {parameter!r}; expected one of {PARAMETER_NAMES}")


def pitman_probability(a: ReplicationSet, b: ReplicationSet, parameter: str) -> float:
    """
    Share of paired replications where `a` is strictly closer to the truth than `b`.

    Ties count for neither side.
    """
    if len(a) != len(b):
        raise ValueError(f"Pitman comparison needs paired sets, got sizes {len(a)} and {len(b)}")
    if a.truth != b.truth:
        raise ValueError("Pitman comparison needs sets built around the same truth")
    theta = a.target(parameter)
    closer = np.abs(a.values(parameter) - theta) < np.abs(b.values(parameter) - theta)
    return float(closer.mean())


def imse(replications: ReplicationSet, parameter: str) -> float:
    """Mean squared deviation from the truth over replications."""
    errors = replications.values(parameter) - replications.target(parameter)
    return float(np.mean(errors ** 2))


def quadratic_error(estimate: ModelParams, truth: ModelParams) -> Dict[str, float]:
    return {name: (getattr(estimate, name) - getattr(truth, name)) ** 2 for name in PARAMETER_NAMES}


def default_grid() -> np.ndarray:
    return np.linspace(CURVE_GRID_START, CURVE_GRID_STOP, CURVE_GRID_POINTS)


def curve_table(
    params_list: Mapping[str, ModelParams],
    t_grid: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """One row per grid time with survival_<label> and hazard_<label> columns."""
    if not params_list:
        raise ValueError("curve table needs at least one labelled parameter set")
    grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("time grid is empty")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("time grid must be nonnegative and nondecreasing")
    table = pd.DataFrame({"t": grid})
    for label, params in params_list.items():
        table[f"survival_{label}"] = survival(params, grid)
        table[f"hazard_{label}"] = hazard(params, grid)
    return table


def plot_curves(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Two-panel line plot (survival, hazard) of a curve table, saved as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, (ax_s, ax_h) = plt.subplots(1, 2, figsize=(10, 4))
    for column in table.columns:
        if column.startswith("survival_"):
            ax_s.plot(table["t"], table[column], label=column[len("survival_"):])
        elif column.startswith("hazard_"):
            ax_h.plot(table["t"], table[column], label=column[len("hazard_"):])
    ax_s.set_xlabel("t")
    ax_s.set_ylabel("survival")
    ax_h.set_xlabel("t")
    ax_h.set_ylabel("hazard")
    ax_s.legend()
    ax_h.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Wrote curve plot to {path}")
    return path
