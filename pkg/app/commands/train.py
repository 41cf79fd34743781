"""
train-operators and train-rho: the two training phases
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from app.commands.common import Experiment, add_common_arguments, load_config, start_run
from app.models.network import Network
from app.models.quantum import operator_to_features
from app.models.run_record import RunRecord
from app.models.trajectory import Trajectory
from app.services.losses import check_tau_calibration
from app.services.metrics import avg_fidelity, avg_frobenius_error, safe_metric, state_diagnostics
from app.services.oracle_service import OracleService
from app.services.storage import StorageService
from app.services.training_service import TrainedModel, TrainingService
from app.utils.errors import ConfigValidationError
from app.utils.reports import success_report
from config.settings import config

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.fpnn"


def add_parsers(subparsers) -> None:
    ops = subparsers.add_parser("train-operators", help="train the O and Q networks")
    add_common_arguments(ops)
    ops.set_defaults(func=run_operators, command="train-operators")

    rho = subparsers.add_parser("train-rho", help="train the density-matrix network on operator priors")
    add_common_arguments(rho)
    rho.add_argument("--priors", default="oracle", metavar="oracle|PATH",
                     help="'oracle' or an operator run directory / checkpoint")
    rho.add_argument("--rho0", action="append", default=[], metavar="STATE",
                     help="initial state selector; repeat to reuse the priors for several states")
    rho.set_defaults(func=run_rho, command="train-rho")


def save_run(run_dir: Path, model: TrainedModel, results: Dict[str, Any]) -> RunRecord:
    """Checkpoint, loss table and run record of a finished training run."""
    record = model.record
    StorageService.save_checkpoint(run_dir / CHECKPOINT_NAME, model.net.config, model.params,
                                   {"phase": record.phase, "variant": record.variant})
    record.checkpoint = CHECKPOINT_NAME
    record.results = results
    StorageService.write_table(run_dir / "losses.csv", StorageService.losses_frame(record.history))
    StorageService.write_json(run_dir / "run_record.json", record)
    return record


def train_operators(experiment: Experiment, run_dir: Path) -> Dict[str, Any]:
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    O_ref, Q_ref, _ = OracleService.integrate_system(spec, experiment.rho0(), grid, exp.grid.substeps)
    if grid.t_f > 1:
        check_tau_calibration({
            "O": operator_to_features(O_ref.values, spec.o_layout),
            "Q": operator_to_features(Q_ref.values, spec.q_layout),
        }, exp.train.tau)

    model = TrainingService.train_operators(spec, exp.network, exp.train, grid, exp.system)
    O_pred, Q_pred = TrainingService.predict_operators(model.net, model.params, spec, grid)
    StorageService.write_operator_tables(run_dir, "pred", spec, O_pred, Q_pred)
    StorageService.write_operator_tables(run_dir, "oracle", spec, O_ref, Q_ref)

    results = {
        "eps_O": avg_frobenius_error(O_pred, O_ref),
        "eps_Q": avg_frobenius_error(Q_pred, Q_ref),
        "final_loss": model.record.final.total if model.record.final else None,
        "epochs": model.record.epochs_executed,
        "params": model.params.count(),
    }
    record = save_run(run_dir, model, results)
    StorageService.write_metadata(run_dir, experiment.seeds, exp.train.determinism,
                                  StorageService.fixture_references(config.FIXTURE_DIR, spec.name))
    report = success_report({"run_dir": run_dir, "variant": record.variant, **results},
                            f"Operator training finished ({record.variant})")
    StorageService.write_json(run_dir / "report.json", report)
    return report


def run_operators(args: argparse.Namespace) -> Dict[str, Any]:
    experiment = Experiment.from_config(load_config(args))
    run_dir = start_run(args, experiment.config, "train-operators")
    print(f"🚀 Training {experiment.config.network.architecture} operator network "
          f"for {experiment.config.train.T_max} epochs")
    return train_operators(experiment, run_dir)


def resolve_priors(experiment: Experiment, source: str) -> Tuple[Trajectory, Trajectory, str]:
    """O and Q priors on the experiment grid, from the oracle or an operator checkpoint."""
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    if source == "oracle":
        O, Q, _ = OracleService.integrate_system(spec, experiment.rho0(), grid, exp.grid.substeps)
        return O, Q, "oracle"

    path = Path(source)
    if path.is_dir():
        path = path / CHECKPOINT_NAME
    net_config, params, _ = StorageService.load_checkpoint(path)
    if set(net_config.heads) != {"O", "Q"}:
        raise ConfigValidationError(f"{path} is not an operator checkpoint (heads {sorted(net_config.heads)})")
    if net_config.heads != spec.heads:
        raise ConfigValidationError(f"{path} was trained for a different system layout")
    O, Q = TrainingService.predict_operators(Network(net_config), params, spec, grid)
    return O, Q, str(path)


def train_rho_for_state(experiment: Experiment, run_dir: Path, selector: Optional[str],
                        O: Trajectory, Q: Trajectory, prior_source: str) -> Dict[str, Any]:
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    rho0 = experiment.rho0(selector)
    _, _, rho_ref = OracleService.integrate_system(spec, rho0, grid, exp.grid.substeps)

    model = TrainingService.train_rho(spec, rho0, O, Q, exp.rho_network, exp.train, grid, exp.system)
    rho_pred = TrainingService.predict_rho(model.net, model.params, spec, grid)
    StorageService.write_density_tables(run_dir, "pred", spec, rho_pred, rho_ref)
    StorageService.write_density_tables(run_dir, "oracle", spec, rho_ref)

    fidelity = safe_metric(avg_fidelity, rho_pred, rho_ref)
    if fidelity is None:
        print("⚠️  Predicted state left the physical range; fidelity not reported")
    results = {
        "rho0": selector or exp.system.rho0,
        "priors": prior_source,
        "avg_fidelity": fidelity,
        "eps_rho": avg_frobenius_error(rho_pred, rho_ref),
        **state_diagnostics(rho_pred),
        "final_loss": model.record.final.total if model.record.final else None,
        "epochs": model.record.epochs_executed,
    }
    save_run(run_dir, model, results)
    StorageService.write_metadata(run_dir, experiment.seeds, exp.train.determinism,
                                  StorageService.fixture_references(config.FIXTURE_DIR, spec.name),
                                  priors=prior_source)
    return results


def run_rho(args: argparse.Namespace) -> Dict[str, Any]:
    experiment = Experiment.from_config(load_config(args))
    run_dir = start_run(args, experiment.config, "train-rho")
    O, Q, source = resolve_priors(experiment, args.priors)
    selectors: List[Optional[str]] = list(args.rho0) or [None]

    runs = []
    for selector in selectors:
        state_dir = run_dir if len(selectors) == 1 else StorageService.create_run_dir(run_dir / selector)
        print(f"🚀 Training rho network from {selector or experiment.config.system.rho0} "
              f"with {source} priors")
        runs.append(train_rho_for_state(experiment, state_dir, selector, O, Q, source))

    report = success_report({"run_dir": run_dir, "runs": runs}, "Density-matrix training finished")
    StorageService.write_json(run_dir / "report.json", report)
    return report
