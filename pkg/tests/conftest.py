import os

import pytest
from hypothesis import HealthCheck, settings

from tentspace.halfspace import NormedSpace, build_grid

settings.register_profile("default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid1():
    """Default grid in one dimension."""
    return build_grid(1, 4, 1 / 16, 2, 5)


@pytest.fixture(scope="session")
def grid2():
    """Default grid in two dimensions."""
    return build_grid(2, 2, 1 / 8, 2, 5)


@pytest.fixture(scope="session")
def small1():
    return build_grid(1, 2, 1 / 8, 1, 3)


@pytest.fixture(scope="session")
def small2():
    return build_grid(2, 1, 1 / 4, 1, 3)


@pytest.fixture(scope="session")
def euclid():
    return NormedSpace(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(':'))):
            terminalreporter.write_line(line)
