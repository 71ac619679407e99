"""Command-line entry: run experiments, print the limit table, list stored runs."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from backend import __version__
from backend.services import experiments, limits
from backend.services.montecarlo import BudgetExceededError
from backend.services.utils import format_number

logger = logging.getLogger("hullwalk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _configure_logging() -> None:
    level = os.getenv("HULLWALK_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _default_workers() -> int:
    try:
        return max(1, int(os.getenv("HULLWALK_WORKERS", "1")))
    except ValueError:
        return 1


def _cmd_run(args: argparse.Namespace) -> int:
    config = experiments.parse_config(args.config)
    workers = args.workers if args.workers is not None else _default_workers()
    record = experiments.run(config, out_dir=args.out, workers=workers, persist=not args.no_db)
    failed = [check.name for check in record.checks if not check.passed]
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
    print(record.output_dir / "results.csv")
    return EXIT_OK


def _cmd_limits(args: argparse.Namespace) -> int:
    dims = args.d or [2, 3, 4]
    for constant in limits.limit_table(dims):
        print(f"{constant.label:<32} {format_number(constant.value)}")
    return EXIT_OK


def _cmd_runs(args: argparse.Namespace) -> int:
    for run in experiments.list_runs(args.limit):
        print(f"{run['id']}  {run['kind']:<20} seed={run['seed']:<8} {run['wallTime']:.1f}s  {run['outputDir']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hullwalk", description="Convex hulls of stable random walks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run an experiment config")
    run_parser.add_argument("config", help="path to the experiment config")
    run_parser.add_argument("--out", default=None, help="output directory (overrides output/directory)")
    run_parser.add_argument("--workers", type=int, default=None, help="worker processes (default $HULLWALK_WORKERS or 1)")
    run_parser.add_argument("--no-db", action="store_true", help="do not store the run in the database")
    run_parser.set_defaults(func=_cmd_run)

    limits_parser = commands.add_parser("limits", help="print the closed-form limit table")
    limits_parser.add_argument("--d", type=int, action="append", help="dimension (repeatable; default 2, 3, 4)")
    limits_parser.set_defaults(func=_cmd_limits)

    runs_parser = commands.add_parser("runs", help="list stored runs")
    runs_parser.add_argument("--limit", type=int, default=20)
    runs_parser.set_defaults(func=_cmd_runs)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
