import numpy as np
import pytest

from rodlab.rod import Grid, RodParams

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def params():
    return RodParams(bend_A=1.0, twist_C=0.75, length_L=1.0, twist_M=1.0)


@pytest.fixture
def grid():
    return Grid.unit(100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
