"""
compare-architectures: forked vs unified vs separated at matched capacity
"""

import argparse
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from app.commands.common import Experiment, add_common_arguments, load_config, start_run
from app.services.oracle_service import OracleService
from app.services.storage import StorageService
from app.services.training_service import TrainingService
from app.utils.reports import success_report
from config.settings import config


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("compare-architectures",
                                   help="train every configured architecture for every seed")
    add_common_arguments(parser)
    parser.add_argument("--ablate-er", action="store_true",
                        help="add a forked arm trained without the evolution regularizer")
    parser.set_defaults(func=run, command="compare-architectures")


def ranking(summary: pd.DataFrame) -> Dict[str, Any]:
    """Which arm has the lowest median loss and how the others compare to forked."""
    best = summary.iloc[0]
    out: Dict[str, Any] = {"best": f"{best['architecture']} ({best['variant']})"}
    forked = summary[(summary["architecture"] == "forked") & (summary["variant"] == "ER")]
    if not forked.empty and len(summary) > 1:
        reference = float(forked["l_tot_median"].iloc[0])
        out["loss_ratio_vs_forked"] = {
            f"{row.architecture} ({row.variant})": float(row.l_tot_median) / reference
            for row in summary.itertuples() if reference > 0
        }
    return out


def compare(experiment: Experiment, run_dir: Path, ablate_er: bool = False) -> Dict[str, Any]:
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    O_ref, Q_ref, _ = OracleService.integrate_system(spec, experiment.rho0(), grid, exp.grid.substeps)
    rows = TrainingService.compare_architectures(
        spec, exp.compare, exp.network, exp.train, grid,
        reference=(O_ref, Q_ref), ablate_er=ablate_er, system=exp.system)
    summary = TrainingService.summarize_comparison(rows)

    StorageService.write_table(run_dir / "comparison_runs.csv", pd.DataFrame(rows))
    StorageService.write_table(run_dir / "comparison_summary.csv", summary)
    StorageService.write_metadata(run_dir, {"seeds": exp.compare.seeds, "train": exp.train.seed},
                                  exp.train.determinism,
                                  StorageService.fixture_references(config.FIXTURE_DIR, spec.name),
                                  width=exp.compare.width)
    report = success_report({
        "run_dir": run_dir,
        "summary": summary.to_dict(orient="records"),
        **ranking(summary),
    }, "Architecture comparison finished")
    StorageService.write_json(run_dir / "report.json", report)
    return report


def run(args: argparse.Namespace) -> Dict[str, Any]:
    experiment = Experiment.from_config(load_config(args))
    run_dir = start_run(args, experiment.config, "compare")
    arms = ", ".join(experiment.config.compare.architectures)
    print(f"🚀 Comparing {arms} over seeds {experiment.config.compare.seeds}")
    return compare(experiment, run_dir, ablate_er=args.ablate_er)
