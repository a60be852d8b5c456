import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bispec.oracle import build_quadrature
from bispec.su2 import get_table

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def table():
    return get_table(5)


_RULES = {}


def quadrature(L, d=3):
    if (L, d) not in _RULES:
        _RULES[(L, d)] = build_quadrature(L, d)
    return _RULES[(L, d)]


@pytest.fixture(scope="session")
def rule_for():
    return quadrature


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)
