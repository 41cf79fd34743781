"""
oracle: RK4 reference trajectories and regression fixtures
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from app.commands.common import Experiment, add_common_arguments, load_config, start_run
from app.models.quantum import operator_to_features
from app.models.trajectory import TimeGrid
from app.services.losses import check_tau_calibration
from app.services.oracle_service import OracleService
from app.services.storage import StorageService
from app.utils.errors import ConfigValidationError, IntegrationError
from app.utils.reports import success_report
from config.settings import config

logger = logging.getLogger(__name__)

FIXTURE_GRID = TimeGrid(601, 6.0)
FIXTURE_TIMES = (1.0, 3.0, 6.0)
FIXTURE_ATOL = 1e-12


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("oracle", help="integrate the reference (O, Q, rho) trajectories")
    add_common_arguments(parser)
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--fixtures", action="store_true",
                       help=f"also write hashed regression fixtures to {config.FIXTURE_DIR}/")
    group.add_argument("--check-fixtures", action="store_true",
                       help=f"recompute the fixture values and compare them with {config.FIXTURE_DIR}/")
    parser.set_defaults(func=run, command="oracle")


def fixture_frame(experiment: Experiment) -> pd.DataFrame:
    """O features at t = 1, 3, 6 from a fine integration."""
    spec = experiment.spec
    O, _, _ = OracleService.integrate_system(spec, experiment.rho0(), FIXTURE_GRID, config.FIXTURE_SUBSTEPS)
    rows = [int(round(t / FIXTURE_GRID.spacing)) for t in FIXTURE_TIMES]
    features = operator_to_features(O.values[rows], spec.o_layout)
    columns = {"t": FIXTURE_GRID.times[rows]}
    for i, name in enumerate(spec.o_layout.names):
        columns[name] = features[:, i]
    return pd.DataFrame(columns)


def write_fixture(experiment: Experiment, fixture_dir, command: str):
    name = StorageService.fixture_name(experiment.spec.name)
    return StorageService.write_fixture(fixture_dir, name, fixture_frame(experiment), command)


def check_fixture(experiment: Experiment, fixture_dir) -> Dict[str, Any]:
    """Compare a fresh fixture integration with the stored, hash-checked table."""
    path = Path(fixture_dir) / StorageService.fixture_name(experiment.spec.name)
    digest = StorageService.verify_fixture(path)
    stored = StorageService.read_table(path)
    fresh = fixture_frame(experiment)
    if list(stored.columns) != list(fresh.columns) or len(stored) != len(fresh):
        raise ConfigValidationError(
            f"Fixture {path.name} has columns {list(stored.columns)} and {len(stored)} rows, "
            f"expected {list(fresh.columns)} and {len(fresh)}")
    deviation = np.abs(stored.to_numpy(dtype=float) - fresh.to_numpy(dtype=float))
    worst = float(np.max(deviation))
    if worst > FIXTURE_ATOL:
        row = int(np.unravel_index(np.argmax(deviation), deviation.shape)[0])
        raise IntegrationError(f"Oracle drifted {worst:.3e} from fixture {path.name}",
                               float(fresh["t"].iloc[row]))
    logger.info("fixture %s matches (max deviation %.3e)", path.name, worst)
    return {"fixture": path.name, "sha256": digest, "max_deviation": worst}


def run_oracle(experiment: Experiment, run_dir: Path, fixtures: bool = False,
               command: str = "main.py oracle --fixtures", check_fixtures: bool = False) -> Dict[str, Any]:
    exp, spec, grid = experiment.config, experiment.spec, experiment.grid
    rho0 = experiment.rho0()
    O, Q, rho = OracleService.integrate_system(spec, rho0, grid, exp.grid.substeps)

    StorageService.write_operator_tables(run_dir, "oracle", spec, O, Q)
    StorageService.write_density_tables(run_dir, "oracle", spec, rho)

    tv = {}
    if grid.t_f > 1:
        tv = check_tau_calibration({
            "O": operator_to_features(O.values, spec.o_layout),
            "Q": operator_to_features(Q.values, spec.q_layout),
        }, exp.train.tau)

    fixture_check = None
    if fixtures:
        path, digest = write_fixture(experiment, config.FIXTURE_DIR, command)
        print(f"✅ Fixture {path} ({digest[:12]})")
    if check_fixtures:
        fixture_check = check_fixture(experiment, config.FIXTURE_DIR)
        print(f"✅ Fixture {fixture_check['fixture']} reproduced "
              f"(max deviation {fixture_check['max_deviation']:.3e})")
    fixture_hashes = StorageService.fixture_references(config.FIXTURE_DIR, spec.name)

    StorageService.write_metadata(run_dir, experiment.seeds, exp.train.determinism, fixture_hashes)
    report = success_report({
        "run_dir": run_dir,
        "system": spec.name,
        "grid_points": grid.t_f,
        "substeps": exp.grid.substeps,
        "tv": tv,
        "fixtures": fixture_hashes,
        "fixture_check": fixture_check,
    }, "Oracle trajectories written")
    StorageService.write_json(run_dir / "report.json", report)
    return report


def run(args: argparse.Namespace) -> Dict[str, Any]:
    experiment = Experiment.from_config(load_config(args))
    run_dir = start_run(args, experiment.config, "oracle")
    print(f"🚀 Integrating {experiment.spec.name} oracle on {experiment.grid.t_f} points")
    return run_oracle(experiment, run_dir, fixtures=args.fixtures, check_fixtures=args.check_fixtures)
