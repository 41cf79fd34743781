"""
Argument handling and experiment setup shared by the subcommands
"""

import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from app.models.quantum import BathParams, SystemSpec, build_system, initial_state
from app.models.trajectory import TimeGrid
from app.services.storage import StorageService
from app.utils.validation import ExperimentConfig, build_experiment_config, load_experiment_config


@dataclass
class Experiment:
    """A validated config with the objects every command derives from it."""
    config: ExperimentConfig
    spec: SystemSpec
    grid: TimeGrid

    @classmethod
    def from_config(cls, exp: ExperimentConfig) -> "Experiment":
        system = exp.system
        bath = BathParams(Gamma=system.Gamma, gamma=system.gamma, T=system.T)
        spec = build_system(system.name, bath, J=system.J, Delta=system.Delta)
        return cls(config=exp, spec=spec, grid=TimeGrid(exp.grid.t_f, exp.grid.T_tot))

    def rho0(self, selector: Optional[str] = None) -> np.ndarray:
        system = self.config.system
        return initial_state(selector or system.rho0, self.spec.dim, system.rho0_matrix)

    @property
    def seeds(self) -> dict:
        return {
            "network": self.config.network.seed,
            "rho_network": self.config.rho_network.seed,
            "train": self.config.train.seed,
        }


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", action="append", default=[], metavar="PATH",
                        help="experiment config (JSON); repeat with --sweep to fan out")
    parser.add_argument("--out", metavar="DIR", help="run directory (must not exist)")
    parser.add_argument("--seed", type=int, help="seed for network initialization and dropout")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, e.g. train.T_max=100")
    parser.add_argument("--profile", choices=["full", "ci"], help="preset network/train settings")
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded BLAS and fixed seeds for bit-identical reruns")
    parser.add_argument("--sweep", action="store_true", help="run every --config as its own job")
    parser.add_argument("--sweep-gamma", metavar="G1,G2,...",
                        help="run one job per bath frequency gamma")


def collect_overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides += [f"network.seed={args.seed}", f"rho_network.seed={args.seed}",
                      f"train.seed={args.seed}"]
    if getattr(args, "deterministic", False):
        overrides.append("train.determinism=true")
    return overrides


def load_config(args: argparse.Namespace, path: Optional[str] = None,
                extra: Optional[List[str]] = None) -> ExperimentConfig:
    """Validated config from a file (or the defaults) plus profile and overrides."""
    overrides = collect_overrides(args) + list(extra or [])
    profile = getattr(args, "profile", None)
    if path is None and args.config:
        path = args.config[0]
    if path is None:
        return build_experiment_config({}, overrides, profile)
    return load_experiment_config(path, overrides, profile)


def resolve_run_dir(args: argparse.Namespace, exp: ExperimentConfig, command: str) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        out = Path(exp.output_dir) / f"{command}_{exp.system.name}_seed{exp.train.seed}"
    return StorageService.create_run_dir(out)


def start_run(args: argparse.Namespace, exp: ExperimentConfig, command: str) -> Path:
    """Create the run directory and snapshot the validated config into it."""
    run_dir = resolve_run_dir(args, exp, command)
    StorageService.write_json(run_dir / "config.json", exp)
    return run_dir
