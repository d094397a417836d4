import numpy as np
import pytest

from src.config import ChainConfig, Hyperparameters
from src.model import ModelState, ReadCountData


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long sampler acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running sampler acceptance test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def hyper():
    return Hyperparameters(a_phi=30.0, b_phi=3.0)


@pytest.fixture
def tiny_hyper():
    return Hyperparameters(Q=2, a_phi=30.0, b_phi=3.0)


@pytest.fixture
def quick_chain():
    return ChainConfig(n_iter=60, burn_in=20, seed=11, inner_advance=2, warm_burn_in=5, log_every=0)


@pytest.fixture
def small_data():
    N = np.array([[10.0, 12.0], [8.0, 9.0], [11.0, 7.0]])
    n = np.array([[5.0, 6.0], [0.0, 1.0], [3.0, 2.0]])
    return ReadCountData(N=N, n=n)


@pytest.fixture
def small_state():
    return ModelState(
        L=np.array([[3, 2], [1, 2], [2, 0]]),
        Z=np.array([[2, 1], [0, 1], [1, 0]]),
        pi=np.array([[0.1, 0.2, 0.4, 0.3], [0.25, 0.25, 0.25, 0.25]]),
        theta=np.array([[0.2, 1.5, 0.7], [0.4, 0.9, 1.1]]),
        phi=np.array([10.0, 9.0]),
        p0=0.05,
    )
