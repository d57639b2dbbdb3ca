import numpy as np
import pytest

from coupled_extremal import Grid, ProblemData, flat_form, form_from_potential


def cosine_data(n=64, amp=0.5):
    """m = 1, flat form, weight ``amp * cos(2 pi x)``."""
    g = Grid(1, n)
    return ProblemData([flat_form(g)], g.cosine_series([((1, 0), amp)]))


def mixed_data(n=64):
    """Two forms (flat, and a small y-bump) with weight ``0.3 cos(2 pi x)``."""
    g = Grid(1, n)
    bump = form_from_potential(1.0, g.cosine_series([((0, 1), 0.002)]))
    return ProblemData([flat_form(g), bump], g.cosine_series([((1, 0), 0.3)]))


def flat_data(n=64, m=2, phi=0.0):
    g = Grid(1, n)
    return ProblemData([flat_form(g) for _ in range(m)], g.constant(phi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record(line: str) -> None:
    """Queue a one-line acceptance verdict for the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
