import numpy as np
import pytest

from qsdsim import validate_chain

THREE = [[1, 0, 0], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]]
ONE = [[1, 0], [0.2, 0.8]]
SYM = [[1, 0, 0], [0.2, 0.4, 0.4], [0.2, 0.4, 0.4]]


def random_chain(rng, d=None, dmax=12, density=0.6):
    """Random valid absorbing chain: positive cycle through the transient states plus noise."""
    d = d or int(rng.integers(1, dmax + 1))
    M = rng.random((d, d + 1)) * (rng.random((d, d + 1)) < density)
    for x in range(d):
        M[x, 1 + (x + 1) % d] += 0.1 + rng.random()
    M[:, 0] += 0.05 * rng.random(d)
    M[int(rng.integers(d)), 0] += 0.1
    M /= M.sum(axis=1, keepdims=True)
    P = np.zeros((d + 1, d + 1))
    P[0, 0] = 1.0
    P[1:] = M
    return validate_chain(P)


def random_simplex(rng, d):
    x = rng.exponential(size=d)
    return x / x.sum()


@pytest.fixture
def three():
    return validate_chain(THREE)


@pytest.fixture
def one():
    return validate_chain(ONE)


@pytest.fixture
def sym():
    return validate_chain(SYM)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
