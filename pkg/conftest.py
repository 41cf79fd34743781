"""
Shared pytest fixtures and the --runslow switch
"""

import numpy as np
import pytest

from app.models.quantum import BathParams, build_system
from app.models.trajectory import TimeGrid
from app.utils.validation import NetworkConfig, TrainConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def bath():
    return BathParams(Gamma=0.1, gamma=0.3, T=20.0)


@pytest.fixture
def spin_boson(bath):
    return build_system("spin_boson", bath)


@pytest.fixture
def xxz():
    return build_system("xxz", BathParams(Gamma=0.1, gamma=0.4, T=20.0), J=2.0, Delta=0.5)


@pytest.fixture
def small_grid():
    return TimeGrid(21, 6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_forked():
    return NetworkConfig(architecture="forked", shared_layers=[8, 8], branch_layers=[6],
                         heads={"O": 4, "Q": 4}, dropout_rate=0.1, seed=3)


@pytest.fixture
def quick_train():
    return TrainConfig(T_max=3, lambda_er=0.01, seed=5)


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
