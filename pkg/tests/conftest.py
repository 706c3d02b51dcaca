import pytest
from hypothesis import HealthCheck, settings

from lpm import systems
from lpm.solver import LPSolver

settings.register_profile(
    "lpm", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("lpm")

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def rotgap06():
    return LPSolver(systems.rotgap(0.6))


@pytest.fixture(scope="session")
def tanh_solver():
    return LPSolver(systems.tanhline(0.5))


@pytest.fixture(scope="session")
def periodic_solver():
    return LPSolver(systems.periodic_diag(0.3))


@pytest.fixture(scope="session")
def constant_solver():
    return LPSolver(systems.constant_diag())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {text}")
