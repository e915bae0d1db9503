"""
Command-line entry point of the dynamics learner.

Subcommands:
    generate  simulate ground-truth trajectories and write them to CSV
    train     run training, writing the metrics CSV and a checkpoint
    evaluate  score a checkpoint against its target model
    sweep     train and evaluate over protocols x tau x runs and aggregate

Every subcommand takes ``--config`` (a TOML run configuration) and an
optional ``--seed`` overriding its master seed. Application errors are
mapped to exit codes by the exception handler: 2 for configuration
problems, 1 for runtime failures.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from app.core.concurrency.workers import WorkerPool
from app.core.configuration.config import settings
from app.core.configuration.run_config import RunConfig, load_run_config
from app.core.exception_handling.error_handler import EXIT_OK, handle_exception
from app.core.logging.logger import get_logger
from app.services.experiments.data import generate_training_data
from app.services.experiments.evaluation import evaluate_run
from app.services.experiments.sweep import (
    aggregate_sweep,
    protocol_ordering_report,
    run_sweep,
    write_sweep_tables,
)
from app.services.experiments.training import CHECKPOINT_FILE, read_checkpoint, run_training
from app.services.integrators.trajectory import read_trajectories, write_trajectories

logger = get_logger(__name__)

DATA_FILE = "data.csv"
EVALUATION_FILE = "evaluation.csv"


def _output_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.output or cfg.output_dir)


def _cmd_generate(args: argparse.Namespace, cfg: RunConfig) -> int:
    trajs = generate_training_data(cfg, pool=WorkerPool(args.workers))
    write_trajectories(trajs, _output_dir(args, cfg) / DATA_FILE)
    return EXIT_OK


def _cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    data = read_trajectories(args.data) if args.data else None
    record = run_training(
        cfg, output_dir=_output_dir(args, cfg), data=data, pool=WorkerPool(args.workers)
    )
    logger.info("Final loss %.6e after %d epochs", record.losses[-1], len(record.epochs))
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = _output_dir(args, cfg)
    checkpoint = read_checkpoint(args.checkpoint or out / CHECKPOINT_FILE)
    learned = checkpoint.to_params(cfg.trainee_params())
    evaluation = evaluate_run(cfg, learned, pool=WorkerPool(args.workers))
    table = pd.DataFrame(
        sorted(evaluation.as_metrics().items()), columns=["metric", "value"]
    )
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / EVALUATION_FILE, index=False, float_format="%.6e")
    print(table.to_string(index=False))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    raw = run_sweep(cfg, runs=args.runs, pool=WorkerPool(args.workers))
    tables = aggregate_sweep(raw)
    write_sweep_tables(raw, tables, _output_dir(args, cfg))
    if "conditionals" in cfg.sweep.protocols and not raw.empty:
        metric = raw["metric"].iloc[0]
        protocol_ordering_report(raw, metric, cfg.sweep.taus[0])
    return EXIT_OK


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="dynamics-learner",
        description="Learn second-order stochastic dynamics from trajectory samples.",
    )
    parser.add_argument(
        "--version", action="version", version=settings.version if settings else "0.1.0"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="TOML run configuration")
        sub.add_argument("--seed", type=int, default=None, help="override master_seed")
        sub.add_argument("--output", default=None, help="output directory")
        sub.add_argument("--workers", type=int, default=None, help="worker threads")
        if name == "train":
            sub.add_argument("--data", default=None, help="trajectory CSV from generate")
        if name == "evaluate":
            sub.add_argument("--checkpoint", default=None, help="checkpoint JSON")
        if name == "sweep":
            sub.add_argument("--runs", type=int, default=None, help="repeats per cell")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name; defaults to sys.argv

    Returns:
        int: Process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, seed_override=args.seed)
        logger.info("Running %s with %s (seed %d)", args.command, args.config, cfg.master_seed)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # pylint: disable=broad-exception-caught
        return handle_exception(exc)


if __name__ == "__main__":
    sys.exit(main())
