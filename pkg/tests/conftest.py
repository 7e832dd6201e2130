import logging

import pytest
from hypothesis import HealthCheck, settings

from newton_atlas.algebra import Polynomial
from newton_atlas.dynamics import quadratic_family
from newton_atlas.newton import build_newton

settings.register_profile("artifact", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("artifact")

# acceptance tests append (criterion, ok, detail) rows here
ACCEPTANCE_LINES: list = []


@pytest.fixture(autouse=True)
def _quiet_root_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="newton_atlas")


@pytest.fixture(scope="session")
def cubic():
    return build_newton(Polynomial([0, -1, 0, 1]))


@pytest.fixture(scope="session")
def quarter():
    return quadratic_family().spec(-0.25)


@pytest.fixture(scope="session")
def two():
    return quadratic_family().spec(2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
