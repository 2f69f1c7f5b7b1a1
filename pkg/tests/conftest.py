import numpy as np
import pytest

from robustpir.config import SystemConfig


@pytest.fixture
def ex1():
    return SystemConfig(4, 2, 3, 2, 1)


@pytest.fixture
def ex2():
    return SystemConfig(5, 2, 5, 2, 2)


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
