import numpy as np
import pytest

from basintopo.basin import GridSpec, compute_basin
from basintopo.flow import IntegrationParams

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def funnel_grid_small():
    spec = GridSpec(-np.pi, np.pi, -4.0, 8.0, 32, 24)
    return compute_basin("FUNNEL_M", spec, IntegrationParams(0.02, 80.0, 0.5, 1.0))
