"""Shared fixtures plus the acceptance summary banner."""

import numpy as np
import pytest

CRITERION_LINES = []


def record_criterion(line):
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _numpy_errstate():
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        yield
