"""
Two-phase physics-informed training: the operator networks first, then the
density-matrix network with the operators supplied as fixed priors.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.autodiff.layers import Dual
from app.autodiff.tape import Tape
from app.models.network import EVAL, ForwardMode, Network, ParamStore, backward, build_network, forward
from app.models.quantum import (
    SystemSpec,
    density_rate,
    features_to_density,
    features_to_operator,
)
from app.models.run_record import LossBreakdown, RunRecord
from app.models.trajectory import TimeGrid, Trajectory
from app.services.losses import HeadTrajectory, loss_er, loss_ini, loss_mod
from app.services.metrics import avg_frobenius_error
from app.services.optim import AdamWState, adamw_step, cosine_lr
from app.utils.errors import DimensionError, NumericalError, TrainingAbortedError
from app.utils.validation import CompareBlock, GridBlock, NetworkConfig, SystemBlock, TrainConfig
from config.settings import config

logger = logging.getLogger(__name__)

Terms = Dict[str, Dict[str, object]]


@dataclass
class TrainedModel:
    net: Network
    params: ParamStore
    record: RunRecord


def epoch_seed(seed: int, epoch: int) -> int:
    """Dropout seed for one epoch, a pure function of (seed, epoch)."""
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def variant_label(lambda_er: float) -> str:
    return "ER" if lambda_er > 0 else "no-ER"


def _operator_trajectories(duals: Dict[str, Dual], spec: SystemSpec) -> Dict[str, HeadTrajectory]:
    layouts = {"O": spec.o_layout, "Q": spec.q_layout}
    return {
        head: HeadTrajectory(features_to_operator(duals[head].value, layout),
                             features_to_operator(duals[head].tangent, layout))
        for head, layout in layouts.items()
    }


def operator_terms(duals: Dict[str, Dual], spec: SystemSpec, train: TrainConfig) -> Terms:
    """L_mod, L_ini and L_er for both operator heads, with cross-head detach."""
    trajectories = _operator_trajectories(duals, spec)
    zero = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    terms: Terms = {"mod": {}, "ini": {}, "er": {}}
    for head in ("O", "Q"):
        terms["mod"][head] = loss_mod(head, trajectories, spec, detach_cross=True)
        terms["ini"][head] = loss_ini(trajectories[head].value[0], zero)
        terms["er"][head] = loss_er(duals[head].value, train.lambda_er, train.tau)
    return terms


def rho_terms(duals: Dict[str, Dual], spec: SystemSpec, rho0: np.ndarray,
              oprior: np.ndarray, qprior: np.ndarray, train: TrainConfig) -> Terms:
    layout = spec.rho_layout
    rho = HeadTrajectory(features_to_density(duals["rho"].value, layout),
                         density_rate(duals["rho"].tangent, layout))
    trajectories = {"rho": rho, "O": HeadTrajectory(oprior, None), "Q": HeadTrajectory(qprior, None)}
    return {
        "mod": {"rho": loss_mod("rho", trajectories, spec)},
        "ini": {"rho": loss_ini(rho.value[0], rho0)},
        "er": {"rho": loss_er(duals["rho"].value, train.rho_lambda_er, train.tau)},
    }


class TrainingService:
    """Service class for network training and prediction."""

    @staticmethod
    def _epoch(net: Network, params: ParamStore, state: AdamWState, times: np.ndarray, epoch: int,
               train: TrainConfig, build_terms: Callable[[Dict[str, Dual]], Terms]) -> LossBreakdown:
        try:
            tape = Tape()
            bound = params.bind(tape)
            duals = net.forward_dual(bound, times, ForwardMode.training(epoch_seed(train.seed, epoch)), tape)
            terms = build_terms(duals)
        except TrainingAbortedError:
            raise
        except NumericalError as e:
            raise TrainingAbortedError(str(e), epoch)

        parts = [t for kind in ("mod", "ini", "er") for t in terms[kind].values()]
        total = parts[0]
        for part in parts[1:]:
            total = total + part
        value = total.item()
        if not np.isfinite(value):
            raise TrainingAbortedError("Non-finite loss", epoch)

        grads = backward(tape, total, bound, params)
        if not all(np.isfinite(g).all() for _, g in grads.items()):
            raise TrainingAbortedError("Non-finite gradient", epoch)

        lr = cosine_lr(epoch, train)
        adamw_step(params, grads, state, lr, train)
        return LossBreakdown(
            epoch=epoch,
            lr=lr,
            total=value,
            mod={h: float(t) for h, t in terms["mod"].items()},
            ini={h: float(t) for h, t in terms["ini"].items()},
            er={h: float(t) for h, t in terms["er"].items()},
        )

    @staticmethod
    def _fit(net: Network, params: ParamStore, grid: TimeGrid, train: TrainConfig,
             build_terms: Callable[[Dict[str, Dual]], Terms], label: str) -> List[LossBreakdown]:
        state = AdamWState.zeros(params)
        times = grid.times
        history = []
        for epoch in range(train.T_max):
            breakdown = TrainingService._epoch(net, params, state, times, epoch, train, build_terms)
            history.append(breakdown)
            if (epoch + 1) % config.LOG_EVERY == 0 or epoch + 1 == train.T_max:
                logger.info("%s epoch %d/%d  L_tot=%.6e  lr=%.3e",
                            label, epoch + 1, train.T_max, breakdown.total, breakdown.lr)
        return history

    @staticmethod
    def train_operators(spec: SystemSpec, net_config: NetworkConfig, train_config: TrainConfig,
                        grid: TimeGrid, system: Optional[SystemBlock] = None) -> TrainedModel:
        """Full-batch training of the O and Q heads for T_max epochs."""
        net_config = net_config.with_heads(spec.heads)
        params, net = build_network(net_config)
        started = time.perf_counter()
        history = TrainingService._fit(
            net, params, grid, train_config,
            lambda duals: operator_terms(duals, spec, train_config),
            f"{spec.name}/{net_config.architecture}")
        record = RunRecord(
            phase="operators",
            system=system,
            grid=GridBlock(t_f=grid.t_f, T_tot=grid.T_tot),
            network=net_config,
            train=train_config,
            variant=variant_label(train_config.lambda_er),
            history=history,
            wall_time=time.perf_counter() - started,
        )
        return TrainedModel(net, params, record)

    @staticmethod
    def train_rho(spec: SystemSpec, rho0: np.ndarray, oprior: Trajectory, qprior: Trajectory,
                  net_config: NetworkConfig, train_config: TrainConfig, grid: TimeGrid,
                  system: Optional[SystemBlock] = None) -> TrainedModel:
        """Train the plain density-matrix network with O and Q held fixed."""
        oprior.check_same_grid(qprior)
        if oprior.grid != grid:
            raise DimensionError(
                f"Priors live on a {oprior.grid.t_f}-point grid, training grid has {grid.t_f} points")
        rho0 = np.asarray(rho0, dtype=np.complex128)
        if rho0.shape != (spec.dim, spec.dim):
            raise DimensionError(f"rho0 has shape {rho0.shape}, expected {(spec.dim, spec.dim)}")

        net_config = net_config.with_heads({"rho": spec.rho_layout.n_features})
        params, net = build_network(net_config)
        started = time.perf_counter()
        history = TrainingService._fit(
            net, params, grid, train_config,
            lambda duals: rho_terms(duals, spec, rho0, oprior.values, qprior.values, train_config),
            f"{spec.name}/rho")
        record = RunRecord(
            phase="rho",
            system=system,
            grid=GridBlock(t_f=grid.t_f, T_tot=grid.T_tot),
            network=net_config,
            train=train_config,
            variant=variant_label(train_config.rho_lambda_er),
            history=history,
            wall_time=time.perf_counter() - started,
        )
        return TrainedModel(net, params, record)

    @staticmethod
    def predict_operators(net: Network, params: ParamStore, spec: SystemSpec,
                          grid: TimeGrid) -> Tuple[Trajectory, Trajectory]:
        out = forward(net, params, grid.times, EVAL)
        return (Trajectory(grid, features_to_operator(out.features["O"], spec.o_layout)),
                Trajectory(grid, features_to_operator(out.features["Q"], spec.q_layout)))

    @staticmethod
    def predict_rho(net: Network, params: ParamStore, spec: SystemSpec, grid: TimeGrid) -> Trajectory:
        out = forward(net, params, grid.times, EVAL)
        return Trajectory(grid, features_to_density(out.features["rho"], spec.rho_layout))

    @staticmethod
    def compare_architectures(spec: SystemSpec, compare: CompareBlock, template: NetworkConfig,
                              train_config: TrainConfig, grid: TimeGrid,
                              reference: Optional[Tuple[Trajectory, Trajectory]] = None,
                              ablate_er: bool = False,
                              system: Optional[SystemBlock] = None) -> List[Dict[str, object]]:
        """Train every architecture at matched width for every seed; one result row per run."""
        arms = []
        for arch in compare.architectures:
            weight = compare.lambda_er.get(arch, train_config.lambda_er)
            arms.append((arch, train_config.model_copy(update={"lambda_er": weight})))
        if ablate_er and "forked" in compare.architectures:
            arms.append(("forked", train_config.model_copy(update={"lambda_er": 0.0})))

        rows = []
        for arch, arm_train in arms:
            for seed in compare.seeds:
                net_config = NetworkConfig.for_architecture(
                    arch, compare.width, dropout_rate=template.dropout_rate,
                    layer_norm=template.layer_norm, seed=seed)
                run_train = arm_train.model_copy(update={"seed": seed})
                model = TrainingService.train_operators(spec, net_config, run_train, grid, system)
                final = model.record.final
                row = {
                    "architecture": arch,
                    "variant": model.record.variant,
                    "seed": seed,
                    "lambda_er": run_train.lambda_er,
                    "params": model.params.count(),
                    "l_tot": final.total if final else float("nan"),
                }
                if reference is not None:
                    o_pred, q_pred = TrainingService.predict_operators(model.net, model.params, spec, grid)
                    row["eps_O"] = avg_frobenius_error(o_pred, reference[0])
                    row["eps_Q"] = avg_frobenius_error(q_pred, reference[1])
                rows.append(row)
                logger.info("compare %s (%s) seed %d: L_tot=%.4e", arch, row["variant"], seed, row["l_tot"])
        return rows

    @staticmethod
    def summarize_comparison(rows: List[Dict[str, object]]) -> pd.DataFrame:
        """Min and median of each metric per architecture arm, sorted by median L_tot."""
        frame = pd.DataFrame(rows)
        metrics = [c for c in ("l_tot", "eps_O", "eps_Q") if c in frame.columns]
        summary = frame.groupby(["architecture", "variant"], sort=False)[metrics].agg(["min", "median"])
        summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
        summary["runs"] = frame.groupby(["architecture", "variant"], sort=False).size()
        return summary.reset_index().sort_values("l_tot_median", kind="stable").reset_index(drop=True)
