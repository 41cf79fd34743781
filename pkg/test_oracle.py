#!/usr/bin/env python3
"""
Tests for the RK4 reference integrator
"""

from pathlib import Path

import numpy as np
import pytest

from app.commands.oracle import FIXTURE_TIMES
from app.models.quantum import (
    features_to_operator,
    initial_state,
    operator_to_features,
)
from app.models.trajectory import TimeGrid, Trajectory
from app.services.metrics import concurrence, expectation
from app.services.oracle_service import CatmullRomInterpolator, OracleService
from app.services.storage import StorageService
from app.utils.errors import DimensionError, IntegrationError
from app.utils.linalg import frobenius_norm
from config.settings import config
from main import main

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def test_rk4_step_matches_taylor_polynomial():
    a = -1.0 + 2.0j
    h = 0.1
    y0 = np.array([[1.0 + 0.5j]])
    (y1,) = OracleService.rk4_step((y0,), h, lambda t, y: (a * y[0],))
    z = h * a
    expected = y0 * (1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24)
    assert np.allclose(y1, expected, rtol=1e-14)


def test_rk4_step_validation():
    y0 = (np.ones((1, 1)),)
    with pytest.raises(DimensionError):
        OracleService.rk4_step(y0, 0.0, lambda t, y: y)
    with pytest.raises(IntegrationError):
        OracleService.rk4_step(y0, 0.1, lambda t, y: (np.full((1, 1), np.nan),))


def test_single_point_grid(spin_boson):
    rho0 = initial_state("ket0", 2)
    O, Q, rho = OracleService.integrate_system(spin_boson, rho0, TimeGrid(1, 6.0))
    assert len(O) == 1
    assert np.array_equal(O.values[0], np.zeros((2, 2)))
    assert np.array_equal(Q.values[0], np.zeros((2, 2)))
    assert np.array_equal(rho.values[0], rho0)


def test_trace_and_hermiticity_preserved(spin_boson):
    _, _, rho = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), TimeGrid(201, 6.0))
    traces = np.trace(rho.values, axis1=-2, axis2=-1)
    assert np.max(np.abs(traces - 1.0)) <= 1e-10
    assert max(frobenius_norm(m - m.conj().T) for m in rho.values) <= 1e-10


def test_operators_stay_in_layout(spin_boson, xxz):
    grid = TimeGrid(61, 6.0)
    for spec, state in ((spin_boson, "ket0"), (xxz, "bell")):
        O, Q, _ = OracleService.integrate_system(spec, initial_state(state, spec.dim), grid)
        for traj, layout in ((O, spec.o_layout), (Q, spec.q_layout)):
            rebuilt = features_to_operator(operator_to_features(traj.values, layout), layout)
            assert np.max(np.abs(rebuilt - traj.values)) <= 1e-12


def test_fourth_order_convergence(spin_boson):
    grid = TimeGrid(41, 6.0)
    rho0 = initial_state("ket0", 2)

    def endpoint(substeps):
        O, Q, rho = OracleService.integrate_system(spin_boson, rho0, grid, substeps)
        return np.concatenate([O.values[-1].ravel(), Q.values[-1].ravel(), rho.values[-1].ravel()])

    reference = endpoint(128)
    coarse = np.linalg.norm(endpoint(4) - reference)
    fine = np.linalg.norm(endpoint(8) - reference)
    assert 12.0 <= coarse / fine <= 20.0


def test_interpolator_samples_and_quadratics():
    grid = TimeGrid(11, 2.0)
    t = grid.times
    values = (t ** 3 - t)[:, None, None] * np.ones((1, 2, 2))
    interp = CatmullRomInterpolator(Trajectory(grid, values.astype(complex)))
    for i in (0, 4, 10):
        assert np.allclose(interp(t[i]), values[i])
    # interior points: Catmull-Rom is exact up to quadratics only
    quad = (t ** 2)[:, None, None] * np.ones((1, 2, 2))
    interp = CatmullRomInterpolator(Trajectory(grid, quad.astype(complex)))
    assert np.allclose(interp(1.1), 1.21)


def test_rho_with_priors_matches_joint_integration(spin_boson):
    """Fine oracle priors reproduce the jointly integrated density matrix."""
    grid = TimeGrid(201, 6.0)
    rho0 = initial_state("ket0", 2)
    _, _, rho_joint = OracleService.integrate_system(spin_boson, rho0, grid, 16)
    O_fine, Q_fine, _ = OracleService.integrate_system(spin_boson, rho0, grid.refined(16), 1)
    rho_prior = OracleService.integrate_rho_with_priors(spin_boson, rho0, O_fine, Q_fine, grid, 16)
    assert np.max(np.abs(rho_prior.values - rho_joint.values)) <= 1e-6


def test_prior_grid_must_refine_target(spin_boson):
    rho0 = initial_state("ket0", 2)
    O, Q, _ = OracleService.integrate_system(spin_boson, rho0, TimeGrid(31, 6.0))
    with pytest.raises(DimensionError):
        OracleService.integrate_rho_with_priors(spin_boson, rho0, O, Q, TimeGrid(21, 6.0))
    with pytest.raises(DimensionError):
        OracleService.integrate_rho_with_priors(spin_boson, rho0, O, Q, TimeGrid(31, 5.0))


def _count_sign_changes(x):
    s = np.sign(x[np.abs(x) > 1e-12])
    return int(np.sum(s[1:] != s[:-1]))


def _local_extrema(x):
    d = np.diff(x)
    return int(np.sum(np.sign(d[1:]) != np.sign(d[:-1])))


@pytest.mark.slow
def test_spin_boson_damped_oscillation(spin_boson):
    _, _, rho = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), TimeGrid(201, 6.0))
    sz = np.array([expectation(m, spin_boson.observables["sigma_z"]) for m in rho.values])
    assert sz[0] == pytest.approx(1.0)
    assert _count_sign_changes(sz) >= 2
    assert _local_extrema(sz) >= 2


@pytest.mark.slow
def test_xxz_concurrence_dynamics(xxz):
    grid = TimeGrid(401, 6.0)
    _, _, bell = OracleService.integrate_system(xxz, initial_state("bell", 4), grid)
    c_bell = np.array([concurrence(m) for m in bell.values])
    assert c_bell[0] == pytest.approx(1.0, abs=1e-9)
    assert c_bell.min() < 1.0 - 1e-3
    d = np.diff(c_bell)
    minima = np.where((d[:-1] < 0) & (d[1:] > 0))[0]
    maxima = np.where((d[:-1] > 0) & (d[1:] < 0))[0]
    assert len(minima) >= 1 and np.any(maxima > minima[0])

    _, _, ground = OracleService.integrate_system(xxz, initial_state("ket00", 4), grid)
    assert max(concurrence(m) for m in ground.values) <= 1e-6


def _scalar_operator_entries(bath, times, dt=1e-3):
    """O12 and O21 of the spin-boson model from the closed equations of the off-diagonal entries."""
    co, cq, g = bath.o_coefficient, bath.q_coefficient, bath.gamma

    def f(y):
        a, b, c, d = y
        k = -2j + (a + c) - (b + d)
        return np.array([co - g * a + k * a, co - g * b - k * b,
                         cq - g * c + k * c, cq - g * d - k * d])

    y = np.zeros(4, dtype=complex)
    done, out = 0, []
    for t in times:
        for _ in range(int(round(t / dt)) - done):
            k1 = f(y)
            k2 = f(y + dt / 2 * k1)
            k3 = f(y + dt / 2 * k2)
            k4 = f(y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        done = int(round(t / dt))
        out.append([y[0].real, y[0].imag, y[1].real, y[1].imag])
    return np.array(out)


def test_spin_boson_operators_match_scalar_equations(spin_boson):
    grid = TimeGrid(601, 6.0)
    O, _, _ = OracleService.integrate_system(spin_boson, initial_state("ket0", 2), grid, 64)
    rows = [int(round(t / grid.spacing)) for t in FIXTURE_TIMES]
    features = operator_to_features(O.values[rows], spin_boson.o_layout)
    expected = _scalar_operator_entries(spin_boson.bath, FIXTURE_TIMES)
    assert np.max(np.abs(features - expected)) <= 1e-9


@pytest.fixture
def stored_fixture(monkeypatch, tmp_path):
    """The repository's spin-boson fixture; written by `main.py oracle --fixtures` when absent."""
    monkeypatch.setattr(config, "FIXTURE_DIR", str(FIXTURE_DIR))
    path = FIXTURE_DIR / StorageService.fixture_name("spin_boson")
    if not path.is_file():
        assert main(["oracle", "--fixtures", "--override", "grid.t_f=2", "--out", str(tmp_path / "gen")]) == 0
    return path


def test_stored_fixture_values(stored_fixture, spin_boson):
    StorageService.verify_fixture(stored_fixture)
    table = StorageService.read_table(stored_fixture)
    assert list(table.columns) == ["t", "re_O12", "im_O12", "re_O21", "im_O21"]
    assert np.allclose(table["t"], FIXTURE_TIMES)
    expected = _scalar_operator_entries(spin_boson.bath, FIXTURE_TIMES)
    assert np.max(np.abs(table.drop(columns="t").to_numpy() - expected)) <= 1e-9


def test_oracle_reproduces_stored_fixture(stored_fixture, tmp_path):
    out = tmp_path / "check"
    assert main(["oracle", "--check-fixtures", "--override", "grid.t_f=2", "--out", str(out)]) == 0
    report = StorageService.read_json(out / "report.json")
    assert report["data"]["fixture_check"]["max_deviation"] <= 1e-12
    digest = StorageService.verify_fixture(stored_fixture)
    assert StorageService.read_json(out / "metadata.json")["fixtures"] == {stored_fixture.name: digest}


def test_fixture_drift_and_tampering(stored_fixture, monkeypatch, tmp_path):
    table = StorageService.read_table(stored_fixture)
    drifted = table.assign(re_O12=table["re_O12"] + 1e-6)
    StorageService.write_fixture(tmp_path / "drift", stored_fixture.name, drifted, "drifted copy")
    monkeypatch.setattr(config, "FIXTURE_DIR", str(tmp_path / "drift"))
    argv = ["oracle", "--check-fixtures", "--override", "grid.t_f=2"]
    assert main([*argv, "--out", str(tmp_path / "a")]) == 2

    tampered = tmp_path / "drift" / stored_fixture.name
    tampered.write_text(tampered.read_text() + "7,0,0,0,0\n")
    assert main([*argv, "--out", str(tmp_path / "b")]) == 1

    monkeypatch.setattr(config, "FIXTURE_DIR", str(tmp_path / "empty"))
    assert main([*argv, "--out", str(tmp_path / "c")]) == 1
