"""
evaluate: re-run a saved checkpoint on the configured grid against the oracle
"""

import argparse
from pathlib import Path
from typing import Any, Dict

from app.commands.common import Experiment, add_common_arguments, load_config, start_run
from app.commands.train import CHECKPOINT_NAME
from app.models.network import Network
from app.services.metrics import avg_fidelity, avg_frobenius_error, safe_metric, state_diagnostics
from app.services.oracle_service import OracleService
from app.services.storage import StorageService
from app.services.training_service import TrainingService
from app.utils.errors import ConfigValidationError
from app.utils.reports import success_report
from config.settings import config


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="evaluate a checkpoint in eval mode")
    add_common_arguments(parser)
    parser.add_argument("checkpoint", help="checkpoint file or run directory")
    parser.add_argument("--rho0", metavar="STATE", help="initial state for the density-matrix reference")
    parser.set_defaults(func=run, command="evaluate")


def evaluate(experiment: Experiment, run_dir: Path, checkpoint, selector=None) -> Dict[str, Any]:
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    path = Path(checkpoint)
    if path.is_dir():
        path = path / CHECKPOINT_NAME
    net_config, params, meta = StorageService.load_checkpoint(path)
    net = Network(net_config)
    O_ref, Q_ref, rho_ref = OracleService.integrate_system(
        spec, experiment.rho0(selector), grid, exp.grid.substeps)

    if net_config.heads == spec.heads:
        O_pred, Q_pred = TrainingService.predict_operators(net, params, spec, grid)
        StorageService.write_operator_tables(run_dir, "pred", spec, O_pred, Q_pred)
        results = {
            "phase": "operators",
            "eps_O": avg_frobenius_error(O_pred, O_ref),
            "eps_Q": avg_frobenius_error(Q_pred, Q_ref),
        }
    elif net_config.heads == {"rho": spec.rho_layout.n_features}:
        rho_pred = TrainingService.predict_rho(net, params, spec, grid)
        StorageService.write_density_tables(run_dir, "pred", spec, rho_pred, rho_ref)
        results = {
            "phase": "rho",
            "avg_fidelity": safe_metric(avg_fidelity, rho_pred, rho_ref),
            "eps_rho": avg_frobenius_error(rho_pred, rho_ref),
            **state_diagnostics(rho_pred),
        }
    else:
        raise ConfigValidationError(
            f"{path} heads {sorted(net_config.heads)} do not fit the {spec.name} system")

    fixtures = StorageService.fixture_references(config.FIXTURE_DIR, spec.name)
    StorageService.write_metadata(run_dir, experiment.seeds, exp.train.determinism, fixtures,
                                  checkpoint=str(path), checkpoint_meta=meta)
    report = success_report({"run_dir": run_dir, "checkpoint": path, **results}, "Evaluation finished")
    StorageService.write_json(run_dir / "report.json", report)
    return report


def run(args: argparse.Namespace) -> Dict[str, Any]:
    experiment = Experiment.from_config(load_config(args))
    run_dir = start_run(args, experiment.config, "evaluate")
    print(f"🚀 Evaluating {args.checkpoint}")
    return evaluate(experiment, run_dir, args.checkpoint, args.rho0)
