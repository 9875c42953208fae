import numpy as np
import pytest

from membrane_split.assembly import FESpace, assemble_forms
from membrane_split.mesh import build_disc_mesh, build_octasphere
from membrane_split.problems import flat_problem, sphere_problem


@pytest.fixture(scope="session")
def sphere():
    return sphere_problem()


@pytest.fixture(scope="session")
def flat():
    return flat_problem()


@pytest.fixture(scope="session")
def octa2():
    V = FESpace(build_octasphere(2))
    return V, assemble_forms(V, sphere_problem().c_weights)


@pytest.fixture(scope="session")
def disc1():
    V = FESpace(build_disc_mesh(1), dirichlet=True)
    return V, assemble_forms(V, flat_problem().c_weights)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria gate")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
