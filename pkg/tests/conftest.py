import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from asymfair import ProbabilityOracle, SolverConfig, equalize_annealed, load_profile

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def peak10():
    return load_profile("peak10")


@pytest.fixture(scope="session")
def beta5():
    return load_profile("beta5")


@pytest.fixture(scope="session")
def peak10_solution(peak10):
    """Annealed multipliers at 1e-5 and their trace, solved once per session."""
    return equalize_annealed(ProbabilityOracle(peak10), SolverConfig(delta=1e-5, record=True))


@pytest.fixture(scope="session")
def beta5_solution(beta5):
    return equalize_annealed(ProbabilityOracle(beta5), SolverConfig(delta=1e-5, q_bound=5.0, record=False))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
