import pytest

from fraclab.discretize import Grid1D, assemble
from fraclab.groundstate import solve_ball, solve_line


@pytest.fixture(scope="session")
def ball_1025():
    return Grid1D.ball(1025)


@pytest.fixture(scope="session")
def ball_state():
    """s = 1/2, lambda = 0, p = 2 on the unit ball, n = 1025."""
    return solve_ball(0.5, 0.0, 2.0, Grid1D.ball(1025))


@pytest.fixture(scope="session")
def line_state():
    """Benjamin-Ono soliton setting: s = 1/2, p = 2, L = 100."""
    return solve_line(0.5, 2.0, Grid1D.line(4001, 100.0))


@pytest.fixture(scope="session")
def op_half(ball_1025):
    return assemble(ball_1025, 0.5)


ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
