import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eh_sched.model import SystemParams
from eh_sched.solver import CapacityWarning

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def W():
    """The worked k1 = k2 = 1 instance with exact rational answers."""
    return SystemParams(eta1=0.3, eta2=0.3, k1=1, k2=1, Q2=1, pmax=0.042)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def quiet_capacity():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapacityWarning)
        yield
