#!/usr/bin/env python3
"""
ForkPINN - non-Markovian open-system dynamics with forked physics-informed networks
Main command-line entry point
"""

import os
import sys

from config.settings import config

# BLAS threading must be pinned before numpy is imported
if config.DETERMINISTIC or "--deterministic" in sys.argv:
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402

from app.commands import register  # noqa: E402
from app.commands.sweep import run_sweep  # noqa: E402
from app.utils.errors import ConfigValidationError, ForkPINNError  # noqa: E402
from app.utils.reports import error_report  # noqa: E402
from app.utils.validation import ExperimentConfig  # noqa: E402


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(prog="forkpinn", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{config.APP_NAME} {config.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    register(subparsers)

    schema = subparsers.add_parser("schema", help="print the experiment config JSON schema")
    schema.set_defaults(func=lambda args: ExperimentConfig.json_schema(), command="schema")

    return parser


def execute(args: argparse.Namespace) -> int:
    """Run one parsed command and map its outcome to an exit code."""
    try:
        if len(getattr(args, "config", [])) > 1 and not args.sweep:
            raise ConfigValidationError("Several --config files need --sweep")
        if getattr(args, "sweep", False) or getattr(args, "sweep_gamma", None):
            report = run_sweep(args)
        else:
            report = args.func(args)
    except ForkPINNError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        print(json.dumps(error_report(str(e), type(e).__name__, e.exit_code), indent=2))
        return e.exit_code

    print(json.dumps(report, indent=2))
    if isinstance(report, dict) and report.get("success") is False:
        return report.get("exit_code", 2)
    return 0


def main(argv=None) -> int:
    """Main application entry point."""
    logging.basicConfig(level=config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = create_parser().parse_args(argv)
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
