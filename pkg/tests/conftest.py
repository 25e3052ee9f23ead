import numpy as np
import pytest

from realgit.examples import make_bracket_action, make_scaling_r2, make_sln_conjugation
from realgit.rep import maximal_torus


@pytest.fixture(scope="session")
def r2():
    return make_scaling_r2()


@pytest.fixture(scope="session")
def sl2():
    return make_sln_conjugation(2)


@pytest.fixture(scope="session")
def sl3():
    return make_sln_conjugation(3)


@pytest.fixture(scope="session")
def br3():
    return make_bracket_action(3, "sl")


@pytest.fixture(scope="session")
def r2_frame(r2):
    return maximal_torus(r2.split)


@pytest.fixture(scope="session")
def sl2_frame(sl2):
    return maximal_torus(sl2.split)


@pytest.fixture(scope="session")
def sl3_frame(sl3):
    return maximal_torus(sl3.split)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mat(*rows):
    return np.array(rows, dtype=float).ravel()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
