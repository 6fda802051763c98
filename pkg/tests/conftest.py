"""Pytest configuration and fixtures."""
import numpy as np
import pandas as pd
import pytest

from twinreg.config import get_settings
from twinreg.models.simulation_models import SimScenario
from twinreg.models.solver_models import Problem, SolverConfig
from twinreg.services.simulate import generate_dataset
from twinreg.services.solver import standardize
from twinreg.utils.io import write_problem_csv


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run Monte Carlo acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo acceptance test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Drop cached settings so environment overrides in a test take effect."""
    for name in ("TWINREG_TAU_SCALE", "TWINREG_CENTER_RESPONSE", "TWINREG_SEED", "TWINREG_JOBS"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def make_raw_problem(n=60, p=20, k=3, sigma=0.5, seed=7):
    """Gaussian design with ``k`` leading signals of size 2."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:k] = 2.0
    y = X @ beta + sigma * rng.standard_normal(n)
    return Problem(y=y, X=X), beta


@pytest.fixture
def raw_problem():
    """A small sparse regression problem on its original scale."""
    return make_raw_problem()[0]


@pytest.fixture
def small_problem(raw_problem):
    """The same problem standardized to unit-norm columns, response centered."""
    return standardize(raw_problem, center_response=True)


@pytest.fixture
def orthonormal_problem():
    """An orthonormal 50 x 10 design with three strong signals."""
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.standard_normal((50, 10)))
    beta = np.zeros(10)
    beta[[1, 4, 7]] = [3.0, -2.5, 1.2]
    y = q @ beta + 0.1 * rng.standard_normal(50)
    return Problem(y=y, X=q, standardized=True)


@pytest.fixture
def cyclic_config():
    return SolverConfig.from_settings(coordinate_order="cyclic", tol=1e-10, max_sweeps=5000)


@pytest.fixture
def problem_csv(tmp_path):
    """A response-first CSV written to a temporary directory."""
    problem, _ = make_raw_problem(n=50, p=8, k=2, seed=3)
    frame = pd.DataFrame(problem.X, columns=[f"g{j}" for j in range(problem.p)])
    frame.insert(0, "y", problem.y)
    path = tmp_path / "data.csv"
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


@pytest.fixture
def simulated_csv(tmp_path):
    """A 60 x 200 sparse-signal dataset written through the simulation sampler."""
    scenario = SimScenario(n=60, p=200, k=5, rho=0.3, seed=21)
    dataset = generate_dataset(scenario, 0)
    return write_problem_csv(tmp_path / "simulated.csv", dataset.problem.y, dataset.problem.X)
