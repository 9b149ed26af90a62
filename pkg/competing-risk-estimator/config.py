"""
Configuration for the competing-risk simulation studies.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Tuple
import json
import logging
import os

from bayes import LossSpec, MhConfig, PriorSpec
from censor import CensorScheme
from model import ModelParams

logger = logging.getLogger(__name__)

try:  # Python 3.11+
    import tomllib  # type: ignore
except Exception:  # pragma: no cover
    tomllib = None

TRUTH = ModelParams(eta0=2.0, eta1=1.0, beta=2.0)
SAMPLE_SIZES = [10, 20, 30]
CENSOR_FRACTIONS = [0.1, 0.2]
ETA0_INTERVAL = (1.0, 300.0)
ETA1_INTERVAL = (1.0, 200.0)
BETA_SUPPORT = (1.0, 5.0)
LOSS_SWEEP = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
SWEEP_LOSSES = [f"{kind}:{v:g}" for kind in ("gq", "entropy", "linex") for v in LOSS_SWEEP]
COMPARISON_LOSSES = ["gq:-2", "entropy:-1", "linex:-0.5"]
STUDIES = ("mle", "bayes", "compare")

WORKERS_ENV = "CRISK_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {WORKERS_ENV}={raw!r}")
        return 1
    return max(workers, 1)


@dataclass
class SimConfig:
    """One (sample size, censor fraction) cell of a study."""
    truth: ModelParams
    n: int
    replications: int
    censor: CensorScheme
    prior: PriorSpec
    losses: List[LossSpec]
    mh: MhConfig
    master_seed: int = 0
    workers: int = 1
    comparison_losses: List[LossSpec] = field(default_factory=list)
    progress: bool = False

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if self.n - self.censor.censored_count(self.n) < 1:
            raise ValueError(f"censor fraction {self.censor.fraction} leaves no failure at n={self.n}")

    @property
    def cell_name(self) -> str:
        return f"{self.n}_{self.censor.percent}"


@dataclass
class StudyConfig:
    """Flat study settings; one file drives every cell of the size x censoring grid."""
    eta0: float = TRUTH.eta0
    eta1: float = TRUTH.eta1
    beta: float = TRUTH.beta
    sizes: List[int] = field(default_factory=lambda: list(SAMPLE_SIZES))
    censor_fractions: List[float] = field(default_factory=lambda: list(CENSOR_FRACTIONS))
    replications: int = 1000
    master_seed: int = 20240
    workers: int = field(default_factory=default_workers)
    eta0_interval: Tuple[float, float] = ETA0_INTERVAL
    eta1_interval: Tuple[float, float] = ETA1_INTERVAL
    beta_support: Tuple[float, float] = BETA_SUPPORT
    losses: List[str] = field(default_factory=lambda: list(SWEEP_LOSSES))
    comparison_losses: List[str] = field(default_factory=lambda: list(COMPARISON_LOSSES))
    mh_draws: int = 20000
    mh_burn_in: int = 4000
    mh_thin: int = 5
    mh_step_sizes: Tuple[float, float, float] = (0.3, 0.3, 0.8)
    output_dir: str = "output"
    progress: bool = True

    def validate(self) -> None:
        if not self.sizes:
            raise ValueError("sizes cannot be empty")
        if not self.censor_fractions:
            raise ValueError("censor_fractions cannot be empty")
        if any(n < 2 for n in self.sizes):
            raise ValueError(f"sizes must be >= 2, got {self.sizes}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if not self.comparison_losses:
            raise ValueError("comparison_losses cannot be empty")
        # building the parts runs their own range checks
        _ = (self.truth, self.prior, self.mh_config(0), self.loss_specs, self.comparison_specs)
        for fraction in self.censor_fractions:
            scheme = CensorScheme(fraction)
            for n in self.sizes:
                if n - scheme.censored_count(n) < 1:
                    raise ValueError(f"censor fraction {fraction} leaves no failure at n={n}")

    @property
    def truth(self) -> ModelParams:
        return ModelParams(eta0=self.eta0, eta1=self.eta1, beta=self.beta)

    @property
    def prior(self) -> PriorSpec:
        return PriorSpec.from_intervals(self.eta0_interval, self.eta1_interval, self.beta_support)

    @property
    def loss_specs(self) -> List[LossSpec]:
        return [LossSpec.parse(text) for text in self.losses]

    @property
    def comparison_specs(self) -> List[LossSpec]:
        return [LossSpec.parse(text) for text in self.comparison_losses]

    def mh_config(self, seed: int) -> MhConfig:
        return MhConfig(
            n_draws=self.mh_draws,
            burn_in=self.mh_burn_in,
            thin=self.mh_thin,
            step_sizes=tuple(self.mh_step_sizes),
            seed=seed,
        )

    def cells(self) -> List[SimConfig]:
        """Per-cell configs over sizes x censor fractions, sizes varying fastest."""
        out = []
        for fraction in self.censor_fractions:
            for n in self.sizes:
                cell = SimConfig(
                    truth=self.truth,
                    n=n,
                    replications=self.replications,
                    censor=CensorScheme(fraction),
                    prior=self.prior,
                    losses=self.loss_specs,
                    mh=self.mh_config(self.master_seed),
                    master_seed=self.master_seed,
                    workers=self.workers,
                    comparison_losses=self.comparison_specs,
                    progress=self.progress,
                )
                cell.validate()
                out.append(cell)
        return out

    @classmethod
    def default(cls) -> "StudyConfig":
        return cls()

    @classmethod
    def smoke_test(cls) -> "StudyConfig":
        return cls(
            sizes=[30],
            censor_fractions=[0.1],
            replications=6,
            losses=list(COMPARISON_LOSSES),
            mh_draws=1500,
            mh_burn_in=500,
            mh_thin=2,
            progress=False,
        )

    def with_overrides(self, **changes: Any) -> "StudyConfig":
        cfg = replace(self, **{k: v for k, v in changes.items() if v is not None})
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "StudyConfig":
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        if p.suffix.lower() == ".json":
            data: Dict[str, Any] = json.loads(p.read_text())
        elif p.suffix.lower() in {".toml", ".tml"}:
            if tomllib is None:
                raise RuntimeError("TOML config requires Python 3.11+ tomllib")
            data = tomllib.loads(p.read_text())
        else:
            raise ValueError("Config file must be .json or .toml")
        if "study" in data and isinstance(data["study"], dict):
            data = data["study"]
        defaults = cls()
        known_keys = set(defaults.__dataclass_fields__)
        unknown = set(data.keys()) - known_keys
        if unknown:
            logger.warning(f"Unknown config keys (will be ignored): {unknown}")
        cfg = cls(
            eta0=float(data.get("eta0", defaults.eta0)),
            eta1=float(data.get("eta1", defaults.eta1)),
            beta=float(data.get("beta", defaults.beta)),
            sizes=[int(n) for n in data.get("sizes", defaults.sizes)],
            censor_fractions=[float(f) for f in data.get("censor_fractions", defaults.censor_fractions)],
            replications=int(data.get("replications", defaults.replications)),
            master_seed=int(data.get("master_seed", defaults.master_seed)),
            workers=int(data.get("workers", defaults.workers)),
            eta0_interval=_pair(data.get("eta0_interval", defaults.eta0_interval), "eta0_interval"),
            eta1_interval=_pair(data.get("eta1_interval", defaults.eta1_interval), "eta1_interval"),
            beta_support=_pair(data.get("beta_support", defaults.beta_support), "beta_support"),
            losses=[str(s) for s in data.get("losses", defaults.losses)],
            comparison_losses=[str(s) for s in data.get("comparison_losses", defaults.comparison_losses)],
            mh_draws=int(data.get("mh_draws", defaults.mh_draws)),
            mh_burn_in=int(data.get("mh_burn_in", defaults.mh_burn_in)),
            mh_thin=int(data.get("mh_thin", defaults.mh_thin)),
            mh_step_sizes=tuple(float(s) for s in data.get("mh_step_sizes", defaults.mh_step_sizes)),
            output_dir=str(data.get("output_dir", defaults.output_dir)),
            progress=bool(data.get("progress", defaults.progress)),
        )
        cfg.validate()
        return cfg


def _pair(value: Any, name: str) -> Tuple[float, float]:
    items = list(value)
    if len(items) != 2:
        raise ValueError(f"{name} must have exactly two numbers, got {value!r}")
    return float(items[0]), float(items[1])
