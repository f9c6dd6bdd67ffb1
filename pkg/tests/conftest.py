from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from kmsfractal.branching import branch_values
from kmsfractal.presets import get_preset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = Fraction


@pytest.fixture(scope="session")
def tent():
    return get_preset("tent")


@pytest.fixture(scope="session")
def doubling():
    return get_preset("doubling")


@pytest.fixture(scope="session")
def gasket():
    return get_preset("sierpinski")


@pytest.fixture(scope="session")
def tent_report(tent):
    return branch_values(tent.ifs)


@pytest.fixture(scope="session")
def doubling_report(doubling):
    return branch_values(doubling.ifs)


@pytest.fixture(scope="session")
def gasket_report(gasket):
    return branch_values(gasket.ifs)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
