from pathlib import Path

import numpy as np
import pytest

from ddpsim import BandToBand, Grid, ModelData, PoissonSolver, quadratic

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture(scope="session")
def small_model():
    g = Grid(3, 5.0, 16)
    return ModelData.build(g, quadratic(3), rec=BandToBand(C=1.0))


@pytest.fixture(scope="session")
def small_solver(small_model):
    return PoissonSolver(small_model.grid, small_model.epsilon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
