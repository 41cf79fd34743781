#!/usr/bin/env python3
"""
Tests for the loss terms, the optimizer and the two-phase training pipeline
"""

import logging

import numpy as np
import pytest

from app.models.network import ParamStore, build_network
from app.models.quantum import (
    SIGMA_X,
    BathParams,
    build_system,
    initial_state,
    operator_to_features,
    rhs_O,
)
from app.models.trajectory import TimeGrid
from app.services.losses import (
    HeadTrajectory,
    check_tau_calibration,
    loss_er,
    loss_ini,
    loss_mod,
    total_variation,
)
from app.services.metrics import avg_fidelity, avg_frobenius_error, concurrence
from app.services.optim import AdamWState, adamw_step, cosine_lr
from app.services.oracle_service import OracleService
from app.services.training_service import TrainingService, epoch_seed, variant_label
from app.utils.errors import DimensionError, TrainingAbortedError
from app.utils.validation import CompareBlock, NetworkConfig, TrainConfig, build_experiment_config
from config.settings import config


def _zeros(n, dim=2):
    return np.zeros((n, dim, dim), dtype=complex)


def test_zero_network_dynamics_loss(spin_boson):
    zero = HeadTrajectory(_zeros(5), _zeros(5))
    trajectories = {"O": zero, "Q": zero}
    assert loss_mod("O", trajectories, spin_boson) == pytest.approx(2 * (0.09 + 0.00002025), rel=1e-12)
    assert loss_mod("Q", trajectories, spin_boson) == pytest.approx(2 * 0.09, rel=1e-12)


def test_exact_trajectory_has_small_residual(spin_boson):
    grid = TimeGrid(201, 6.0)
    O, Q, _ = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), grid)
    dO = rhs_O(O.values, Q.values, spin_boson)
    trajectories = {"O": HeadTrajectory(O.values, dO), "Q": HeadTrajectory(Q.values, np.zeros_like(dO))}
    assert loss_mod("O", trajectories, spin_boson) <= 1e-20


def test_loss_mod_rho_checks_prior_grid(spin_boson):
    rho = HeadTrajectory(np.tile(initial_state("ket0", 2), (4, 1, 1)), _zeros(4))
    trajectories = {"rho": rho, "O": HeadTrajectory(_zeros(3), None), "Q": HeadTrajectory(_zeros(3), None)}
    with pytest.raises(DimensionError):
        loss_mod("rho", trajectories, spin_boson)
    with pytest.raises(DimensionError):
        loss_mod("P", {"O": HeadTrajectory(_zeros(3), _zeros(3)), "Q": HeadTrajectory(_zeros(3), _zeros(3))},
                 spin_boson)


def test_stationary_density_has_zero_residual(spin_boson):
    mixed = np.tile(np.eye(2) / 2, (6, 1, 1)).astype(complex)
    trajectories = {"rho": HeadTrajectory(mixed, _zeros(6)),
                    "O": HeadTrajectory(_zeros(6), None), "Q": HeadTrajectory(_zeros(6), None)}
    assert loss_mod("rho", trajectories, spin_boson) == pytest.approx(0.0, abs=1e-30)


def test_loss_ini():
    assert loss_ini(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    assert loss_ini(initial_state("ket0", 2), np.diag([0.0, 1.0])) == pytest.approx(2.0)
    assert loss_ini(SIGMA_X, SIGMA_X) == 0.0


def test_total_variation():
    assert total_variation(np.ones((5, 3))) == 0.0
    assert total_variation(np.array([[0.0], [1.0], [0.0]])) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        total_variation(np.zeros((1, 2)))


def test_total_variation_arc_length_under_refinement():
    def arc_length(n):
        t = np.linspace(0.0, 6.0, n)
        return (n - 1) * total_variation(np.stack([np.sin(t), 0.5 * np.cos(2 * t)], axis=1))

    coarse, fine = arc_length(101), arc_length(201)
    assert abs(fine - coarse) <= 0.05 * fine


def test_loss_er_values():
    tau = 0.0015
    flat = np.zeros((4, 2))
    assert loss_er(flat, 0.01, tau) == 0.01
    ramp = np.array([[0.0], [tau], [2 * tau]])
    assert loss_er(ramp, 0.01, tau) == pytest.approx(0.01 * np.exp(-1.0))
    steep = np.array([[0.0], [20 * tau]])
    assert loss_er(steep, 0.01, tau) < 1e-8 * 0.01
    with pytest.raises(DimensionError):
        loss_er(flat, 0.01, 0.0)


def test_loss_er_monotone_in_variation():
    values = [loss_er(np.array([[0.0], [step]]), 0.1, 0.01) for step in (0.0, 0.001, 0.01, 0.1)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(0 < v <= 0.1 for v in values)


def test_oracle_trajectory_switches_regularizer_off(spin_boson):
    O, Q, _ = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), TimeGrid(201, 6.0))
    for traj, layout in ((O, spin_boson.o_layout), (Q, spin_boson.q_layout)):
        features = operator_to_features(traj.values, layout)
        assert loss_er(features, 0.01, config.TV_TAU) <= 0.01 * 0.01
    assert loss_er(np.ones((201, 4)), 0.01, config.TV_TAU) == 0.01


def test_tau_calibration_warning(caplog):
    ramp = np.linspace(0.0, 1.0, 11)[:, None]
    with caplog.at_level(logging.WARNING, logger="app.services.losses"):
        tvs = check_tau_calibration({"O": ramp}, 0.01)
    assert tvs["O"] == pytest.approx(0.1)
    assert not caplog.records
    with caplog.at_level(logging.WARNING, logger="app.services.losses"):
        check_tau_calibration({"O": ramp}, 0.1)
    assert any("tau" in r.getMessage() for r in caplog.records)


def test_cosine_lr():
    train = TrainConfig(T_max=1000)
    assert cosine_lr(0, train) == pytest.approx(5e-3)
    assert cosine_lr(1000, train) == pytest.approx(1e-5)
    assert cosine_lr(500, train) == pytest.approx(2.505e-3)
    rates = [cosine_lr(t, train) for t in range(0, 1001, 50)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    with pytest.raises(DimensionError):
        cosine_lr(1001, train)
    with pytest.raises(DimensionError):
        cosine_lr(-1, train)


def _store(values):
    return ParamStore({"g": {"w": np.array(values, dtype=float)}})


def test_adamw_zero_gradient_no_decay():
    params = _store([1.0, -2.0])
    train = TrainConfig(weight_decay=0.0)
    adamw_step(params, _store([0.0, 0.0]), AdamWState.zeros(params), 1e-3, train)
    assert np.array_equal(params["w"], [1.0, -2.0])


def test_adamw_first_step_is_sign_step():
    params = _store([1.0, -2.0])
    grads = np.array([0.5, -3.0])
    train = TrainConfig(weight_decay=0.0)
    _, state = adamw_step(params, _store(grads), AdamWState.zeros(params), 1e-3, train)
    expected = np.array([1.0, -2.0]) - 1e-3 * grads / (np.abs(grads) + 1e-8)
    assert np.allclose(params["w"], expected, rtol=1e-12, atol=0)
    assert state.step == 1


def test_adamw_decay_only():
    params = _store([1.0, -2.0])
    train = TrainConfig(weight_decay=0.1)
    adamw_step(params, _store([0.0, 0.0]), AdamWState.zeros(params), 0.01, train)
    assert np.allclose(params["w"], np.array([1.0, -2.0]) * (1 - 0.01 * 0.1), rtol=1e-15)


def test_adamw_shape_mismatch():
    params = _store([1.0, -2.0])
    with pytest.raises(DimensionError):
        adamw_step(params, _store([0.0]), AdamWState.zeros(params), 0.01, TrainConfig())


def test_epoch_seed_and_variant():
    assert epoch_seed(5, 3) == epoch_seed(5, 3)
    assert epoch_seed(5, 3) != epoch_seed(5, 4)
    assert variant_label(0.01) == "ER"
    assert variant_label(0.0) == "no-ER"


def test_zero_epochs_keeps_initialization(spin_boson, tiny_forked, small_grid):
    model = TrainingService.train_operators(spin_boson, tiny_forked, TrainConfig(T_max=0), small_grid)
    init, _ = build_network(tiny_forked.with_heads(spin_boson.heads))
    assert model.record.history == []
    assert model.record.final is None
    assert all(np.array_equal(model.params[n], init[n]) for n, _ in init.items())


def test_operator_training_records_and_determinism(spin_boson, tiny_forked, small_grid, quick_train):
    first = TrainingService.train_operators(spin_boson, tiny_forked, quick_train, small_grid)
    second = TrainingService.train_operators(spin_boson, tiny_forked, quick_train, small_grid)
    history = first.record.history
    assert [b.epoch for b in history] == [0, 1, 2]
    for breakdown in history:
        assert abs(breakdown.total - breakdown.parts_sum()) <= 1e-12 * max(1.0, breakdown.total)
        assert set(breakdown.mod) == {"O", "Q"}
    assert history[0].lr == pytest.approx(quick_train.eta0)
    assert [b.model_dump() for b in history] == [b.model_dump() for b in second.record.history]
    assert all(np.array_equal(first.params[n], second.params[n]) for n, _ in first.params.items())
    assert first.record.variant == "ER"
    assert set(history[0].flat()) == {"epoch", "lr", "l_tot", "l_mod_o", "l_mod_q",
                                      "l_ini_o", "l_ini_q", "l_er_o", "l_er_q"}


def test_training_aborts_on_overflow(tiny_forked, small_grid, quick_train):
    spec = build_system("spin_boson", BathParams(Gamma=1e300, gamma=0.3, T=20.0))
    with pytest.raises(TrainingAbortedError) as excinfo:
        TrainingService.train_operators(spec, tiny_forked, quick_train, small_grid)
    assert excinfo.value.epoch == 0
    assert excinfo.value.exit_code == 2


def test_rho_training_with_oracle_priors(spin_boson, small_grid, quick_train):
    rho0 = initial_state("ket0", 2)
    O, Q, rho_ref = OracleService.integrate_system(spin_boson, rho0, small_grid)
    plain = NetworkConfig.for_architecture("plain", 8, seed=1)
    model = TrainingService.train_rho(spin_boson, rho0, O, Q, plain, quick_train, small_grid)
    assert model.record.phase == "rho"
    assert model.record.network.heads == {"rho": 3}
    assert len(model.record.history) == 3
    assert set(model.record.history[0].mod) == {"rho"}

    pred = TrainingService.predict_rho(model.net, model.params, spin_boson, small_grid)
    traces = np.trace(pred.values, axis1=-2, axis2=-1)
    assert np.max(np.abs(traces - 1.0)) <= 1e-12
    assert pred.values.shape == rho_ref.values.shape


def test_rho_training_rejects_mismatched_priors(spin_boson, small_grid, quick_train):
    rho0 = initial_state("ket0", 2)
    O, Q, _ = OracleService.integrate_system(spin_boson, rho0, TimeGrid(31, 6.0))
    plain = NetworkConfig.for_architecture("plain", 8)
    with pytest.raises(DimensionError):
        TrainingService.train_rho(spin_boson, rho0, O, Q, plain, quick_train, small_grid)
    with pytest.raises(DimensionError):
        TrainingService.train_rho(spin_boson, np.eye(4) / 4, *OracleService.integrate_system(
            spin_boson, rho0, small_grid)[:2], plain, quick_train, small_grid)


def test_compare_architectures(spin_boson, small_grid):
    train = TrainConfig(T_max=2, lambda_er=0.01, seed=0)
    compare = CompareBlock(architectures=["forked", "unified"], seeds=[0, 1], width=8)
    O, Q, _ = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), small_grid)
    template = NetworkConfig(dropout_rate=0.0)
    rows = TrainingService.compare_architectures(spin_boson, compare, template, train, small_grid,
                                                 reference=(O, Q), ablate_er=True)
    assert len(rows) == 6
    assert {(r["architecture"], r["variant"]) for r in rows} == {
        ("forked", "ER"), ("unified", "ER"), ("forked", "no-ER")}
    assert all(np.isfinite(r["eps_O"]) and np.isfinite(r["eps_Q"]) for r in rows)

    summary = TrainingService.summarize_comparison(rows)
    assert len(summary) == 3
    assert list(summary["runs"]) == [2, 2, 2]
    assert {"l_tot_min", "l_tot_median", "eps_O_median"} <= set(summary.columns)
    assert list(summary["l_tot_median"]) == sorted(summary["l_tot_median"])


def test_compare_uses_weight_per_architecture(spin_boson, small_grid):
    train = TrainConfig(T_max=1, lambda_er=0.05, seed=0)
    compare = CompareBlock(architectures=["forked", "unified"], seeds=[0], width=8,
                           lambda_er={"forked": 0.001})
    rows = TrainingService.compare_architectures(spin_boson, compare, NetworkConfig(), train, small_grid,
                                                 ablate_er=True)
    weights = {(r["architecture"], r["variant"]): r["lambda_er"] for r in rows}
    assert weights == {("forked", "ER"): 0.001, ("unified", "ER"): 0.05, ("forked", "no-ER"): 0.0}

@pytest.mark.slow
def test_forked_operator_accuracy_full_schedule(spin_boson):
    grid = TimeGrid(201, 6.0)
    O, Q, _ = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), grid)
    model = TrainingService.train_operators(spin_boson, NetworkConfig(), TrainConfig(), grid)
    o_pred, q_pred = TrainingService.predict_operators(model.net, model.params, spin_boson, grid)
    assert avg_frobenius_error(o_pred, O) <= 0.01
    assert avg_frobenius_error(q_pred, Q) <= 0.01


@pytest.mark.slow
def test_rho_fidelity_with_oracle_priors(spin_boson):
    grid = TimeGrid(201, 6.0)
    rho0 = initial_state("ket0", 2)
    O, Q, rho_ref = OracleService.integrate_system(spin_boson, rho0, grid)
    model = TrainingService.train_rho(spin_boson, rho0, O, Q, NetworkConfig.for_architecture("plain"),
                                      TrainConfig(), grid)
    pred = TrainingService.predict_rho(model.net, model.params, spin_boson, grid)
    assert avg_fidelity(pred, rho_ref) >= 0.999


def _experiment(*overrides):
    exp = build_experiment_config({}, list(overrides))
    spec = build_system(exp.system.name, BathParams(Gamma=exp.system.Gamma, gamma=exp.system.gamma,
                                                    T=exp.system.T), J=exp.system.J, Delta=exp.system.Delta)
    return exp, spec, TimeGrid(exp.grid.t_f, exp.grid.T_tot)


def _operator_errors(rows):
    """Best-of-seeds mean operator error per (architecture, variant) arm."""
    best = {}
    for row in rows:
        key = (row["architecture"], row["variant"])
        error = 0.5 * (row["eps_O"] + row["eps_Q"])
        best[key] = min(best.get(key, np.inf), error)
    return best


def _trained_priors(exp, spec, grid, seed):
    net_config = exp.network.model_copy(update={"seed": seed})
    train = exp.train.model_copy(update={"seed": seed})
    model = TrainingService.train_operators(spec, net_config, train, grid)
    return TrainingService.predict_operators(model.net, model.params, spec, grid)


@pytest.mark.slow
def test_evolution_regularizer_ablation():
    exp, spec, grid = _experiment("system.gamma=0.3")
    O, Q, _ = OracleService.integrate_system(spec, initial_state("ket0", 2), grid)
    compare = CompareBlock(architectures=["forked"], seeds=[0, 1, 2], width=256)
    rows = TrainingService.compare_architectures(spec, compare, exp.network, exp.train, grid,
                                                 reference=(O, Q), ablate_er=True)
    best = _operator_errors(rows)
    assert best[("forked", "no-ER")] >= 3.0 * best[("forked", "ER")]


@pytest.mark.slow
def test_forked_has_lowest_median_loss():
    exp, spec, grid = _experiment("system.gamma=0.3")
    rows = TrainingService.compare_architectures(spec, exp.compare, exp.network, exp.train, grid)
    summary = TrainingService.summarize_comparison(rows)
    assert summary["architecture"].iloc[0] == "forked"
    assert summary["l_tot_median"].iloc[0] < summary["l_tot_median"].iloc[1:].min()


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [0.3, 0.5, 1.0])
def test_rho_fidelity_with_trained_priors(gamma):
    exp, spec, grid = _experiment(f"system.gamma={gamma}")
    rho0 = initial_state("ket0", 2)
    _, _, rho_ref = OracleService.integrate_system(spec, rho0, grid)
    fidelities = []
    for seed in (0, 1, 2):
        O, Q = _trained_priors(exp, spec, grid, seed)
        model = TrainingService.train_rho(spec, rho0, O, Q, exp.rho_network, exp.train, grid)
        pred = TrainingService.predict_rho(model.net, model.params, spec, grid)
        fidelities.append(avg_fidelity(pred, rho_ref))
    assert max(fidelities) >= 0.999


@pytest.mark.slow
def test_xxz_concurrence_with_trained_priors():
    exp, spec, grid = _experiment("system.name=xxz", "system.gamma=0.4", "system.rho0=bell", "grid.t_f=401")
    rho0 = initial_state("bell", 4)
    _, _, rho_ref = OracleService.integrate_system(spec, rho0, grid)
    reference = np.array([concurrence(m) for m in rho_ref.values])
    errors = []
    for seed in (0, 1, 2):
        O, Q = _trained_priors(exp, spec, grid, seed)
        model = TrainingService.train_rho(spec, rho0, O, Q, exp.rho_network, exp.train, grid)
        pred = TrainingService.predict_rho(model.net, model.params, spec, grid)
        errors.append(np.max(np.abs(np.array([concurrence(m) for m in pred.values]) - reference)))
    assert min(errors) <= 0.05
