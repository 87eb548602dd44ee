import numpy as np
import pytest

from trefftz_maxwell.geometry import Domain2D, build_uniform_mesh

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_square():
    return build_uniform_mesh(Domain2D(0.0, 1.0, 0.0, 1.0), 1, 1)


@pytest.fixture
def small_mesh():
    return build_uniform_mesh(Domain2D(0.0, 2.0, 0.0, 2.0), 4, 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
