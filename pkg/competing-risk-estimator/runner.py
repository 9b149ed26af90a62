#!/usr/bin/env python3
"""
Competing-risk estimator - CLI Runner

Fits B(eta0, eta1, beta) = min(Exponential(eta0), Weibull(eta1, beta)) to
right-censored samples and runs the estimator-comparison studies.

Usage:
    python runner.py sample --n 30 --seed 7 --censor 0.1 --output s.csv
    python runner.py fit-mle s.csv
    python runner.py fit-bayes s.csv --loss gq:-2 --export-chain chain.csv
    python runner.py study compare --config ../config/study.toml --workers 4
    python runner.py study mle --smoke-test
    python runner.py curves --fitted 2.1 0.9 1.8 --plot curves.svg

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
import argparse
import json
import logging
import math
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from bayes import LossSpec, MhConfig, PriorSpec, estimate, mh_sample
from censor import CensorScheme
from censor import apply as apply_censoring
from config import (
    BETA_SUPPORT, COMPARISON_LOSSES, ETA0_INTERVAL, ETA1_INTERVAL, STUDIES, TRUTH,
    StudyConfig, default_workers,
)
from evaluation import CURVE_GRID_POINTS, CURVE_GRID_START, CURVE_GRID_STOP, curve_table, plot_curves
from mle import DEFAULT_MAX_ITER, DEFAULT_TOL, ConvergenceError, em_fit
from model import ModelParams, sample_many
from sim import run_study
from storage import SampleFormatError, Storage, read_sample_csv, write_sample_csv, write_table_csv

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def six_digits(value: Any) -> Any:
    """Round every float in a JSON-like structure to 6 significant digits."""
    if isinstance(value, dict):
        return {k: six_digits(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [six_digits(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return float(f"{value:.6g}") if math.isfinite(value) else str(value)
    return value


def _print_json(data: Dict[str, Any]) -> None:
    print(json.dumps(six_digits(data), indent=2))


def _params(values: Optional[List[float]]) -> Optional[ModelParams]:
    return ModelParams.from_sequence(values) if values else None


def cmd_sample(args: argparse.Namespace) -> int:
    params = ModelParams(eta0=args.eta0, eta1=args.eta1, beta=args.beta)
    rng = np.random.default_rng(args.seed)
    times = sample_many(params, rng, args.n)
    sample = apply_censoring(times, CensorScheme(args.censor))
    write_sample_csv(args.output, sample)
    return EXIT_OK


def cmd_fit_mle(args: argparse.Namespace) -> int:
    sample = read_sample_csv(args.sample)
    report = em_fit(sample, init=_params(args.init), tol=args.tol, max_iter=args.max_iter, truth=_params(args.truth))
    _print_json(report.to_dict())
    return EXIT_OK


def _prior_from_args(args: argparse.Namespace) -> PriorSpec:
    return PriorSpec.from_intervals(tuple(args.eta0_interval), tuple(args.eta1_interval), tuple(args.beta_support))


def cmd_fit_bayes(args: argparse.Namespace) -> int:
    sample = read_sample_csv(args.sample)
    prior = _prior_from_args(args)
    losses = [LossSpec.parse(text) for text in (args.loss or COMPARISON_LOSSES)]
    mh = MhConfig(n_draws=args.draws, burn_in=args.burn_in, thin=args.thin, seed=args.seed)
    draws = mh_sample(sample, prior, mh, keep_chain=bool(args.export_chain))
    if args.export_chain:
        path = write_table_csv(args.export_chain, draws.chain_frame())
        logger.info(f"Wrote chain ({mh.n_draws} iterations) to {path}")
    _print_json({
        "prior": prior.to_dict(),
        "draws": len(draws),
        "acceptance_rate": draws.acceptance_rate,
        "warnings": draws.warnings,
        "reports": [estimate(draws, loss).to_dict() for loss in losses],
    })
    return EXIT_OK


def _study_config(args: argparse.Namespace) -> StudyConfig:
    if args.config:
        config = StudyConfig.from_file(args.config)
    elif args.smoke_test:
        config = StudyConfig.smoke_test()
    else:
        config = StudyConfig.default()
    return config.with_overrides(
        workers=args.workers,
        replications=args.replications,
        master_seed=args.master_seed,
        output_dir=args.output_dir,
        progress=False if args.no_progress else None,
    )


def cmd_study(args: argparse.Namespace) -> int:
    config = _study_config(args)
    cells = config.cells()
    logger.info(f"Study {args.study}: {len(cells)} cell(s), {config.replications} replications, {config.workers} worker(s)")
    logger.info(f"Output directory: {config.output_dir}")
    storage = Storage(config.output_dir)
    if args.fresh:
        storage.reset_files()
    for result in run_study(args.study, cells):
        written = storage.write_study(result)
        print(f"  n={result.config.n} censoring={result.config.censor.percent}%: "
              + ", ".join(p.name for p in written.values()))
    print(f"\nOutput: {config.output_dir}/")
    return EXIT_OK


def cmd_curves(args: argparse.Namespace) -> int:
    labelled: Dict[str, ModelParams] = {"truth": ModelParams.from_sequence(args.truth)}
    if args.fitted:
        labelled["fitted"] = ModelParams.from_sequence(args.fitted)
    if args.from_sample:
        labelled["mle"] = em_fit(read_sample_csv(args.from_sample)).params
    grid = np.linspace(args.t_start, args.t_stop, args.points)
    table = curve_table(labelled, grid)
    write_table_csv(args.output, table)
    logger.info(f"Wrote curve table to {args.output}")
    if args.plot:
        plot_curves(table, args.plot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        description="Competing-risk (exponential + Weibull) estimator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Verbose output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="Draw a (censored) sample and write it as CSV")
    p.add_argument("--eta0", type=float, default=TRUTH.eta0, help="Exponential scale (default: 2)")
    p.add_argument("--eta1", type=float, default=TRUTH.eta1, help="Weibull scale (default: 1)")
    p.add_argument("--beta", type=float, default=TRUTH.beta, help="Weibull shape (default: 2)")
    p.add_argument("--n", type=int, default=30, help="Sample size (default: 30)")
    p.add_argument("--censor", type=float, default=0.0, help="Censored fraction, type II (default: 0)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    p.add_argument("--output", default="sample.csv", help="Output CSV (default: sample.csv)")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("fit-mle", help="EM maximum-likelihood fit of a sample CSV")
    p.add_argument("sample", help="CSV with header time,event")
    p.add_argument("--init", type=float, nargs=3, metavar=("ETA0", "ETA1", "BETA"), help="EM starting point")
    p.add_argument("--truth", type=float, nargs=3, metavar=("ETA0", "ETA1", "BETA"),
                   help="Report quadratic error against these values")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help=f"Log-likelihood tolerance (default: {DEFAULT_TOL:g})")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER,
                   help=f"Maximum EM iterations (default: {DEFAULT_MAX_ITER})")
    p.set_defaults(handler=cmd_fit_mle)

    p = sub.add_parser("fit-bayes", help="MH posterior sampling and Bayes estimates of a sample CSV")
    p.add_argument("sample", help="CSV with header time,event")
    p.add_argument("--loss", action="append",
                   help="Loss as kind:value, e.g. gq:-2, entropy:-1, linex:-0.5 (can repeat)")
    p.add_argument("--eta0-interval", type=float, nargs=2, default=list(ETA0_INTERVAL), metavar=("LO", "HI"))
    p.add_argument("--eta1-interval", type=float, nargs=2, default=list(ETA1_INTERVAL), metavar=("LO", "HI"))
    p.add_argument("--beta-support", type=float, nargs=2, default=list(BETA_SUPPORT), metavar=("LO", "HI"))
    p.add_argument("--draws", type=int, default=MhConfig.n_draws, help="Total MH iterations (default: 60000)")
    p.add_argument("--burn-in", type=int, default=MhConfig.burn_in, help="Burn-in iterations (default: 10000)")
    p.add_argument("--thin", type=int, default=MhConfig.thin, help="Thinning interval (default: 5)")
    p.add_argument("--seed", type=int, default=0, help="Chain seed (default: 0)")
    p.add_argument("--export-chain", help="Write every iteration to this CSV")
    p.set_defaults(handler=cmd_fit_bayes)

    p = sub.add_parser("study", help="Run a simulation study over the size x censoring grid")
    p.add_argument("study", choices=STUDIES)
    p.add_argument("--config", help="Path to JSON/TOML study config")
    p.add_argument("--smoke-test", action="store_true", help="Seconds-scale configuration")
    p.add_argument("--workers", type=int, help=f"Worker processes (default: ${{CRISK_WORKERS}} or 1, now {default_workers()})")
    p.add_argument("--replications", type=int, help="Override replications")
    p.add_argument("--master-seed", type=int, help="Override master seed")
    p.add_argument("--output-dir", help="Output directory (default: output)")
    p.add_argument("--no-progress", action="store_true", help="Hide the progress bar")
    p.add_argument("--fresh", action="store_true", help="Remove existing files in the output directory first")
    p.set_defaults(handler=cmd_study)

    p = sub.add_parser("curves", help="Survival and hazard curve table (optionally an SVG plot)")
    p.add_argument("--truth", type=float, nargs=3, default=list(TRUTH.as_array()), metavar=("ETA0", "ETA1", "BETA"))
    p.add_argument("--fitted", type=float, nargs=3, metavar=("ETA0", "ETA1", "BETA"))
    p.add_argument("--from-sample", help="Fit EM to this sample CSV and add its curve")
    p.add_argument("--t-start", type=float, default=CURVE_GRID_START)
    p.add_argument("--t-stop", type=float, default=CURVE_GRID_STOP)
    p.add_argument("--points", type=int, default=CURVE_GRID_POINTS)
    p.add_argument("--output", default="curves.csv", help="Output CSV (default: curves.csv)")
    p.add_argument("--plot", help="Also write an SVG line plot here")
    p.set_defaults(handler=cmd_curves)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        return args.handler(args)
    except SampleFormatError as e:
        logger.error(f"Malformed sample: {e}")
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except ConvergenceError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
