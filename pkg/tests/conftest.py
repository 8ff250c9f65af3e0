import numpy as np
import pytest

from aeromap.geometry import propagation_matrix
from aeromap.scenario import Scenario
from aeromap.verify import random_scenario


@pytest.fixture(scope="session")
def scenario():
    return Scenario.default()


@pytest.fixture(scope="session")
def G(scenario):
    return scenario.propagation()


@pytest.fixture(scope="session")
def small_G():
    return propagation_matrix(*random_scenario(6, 8, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
