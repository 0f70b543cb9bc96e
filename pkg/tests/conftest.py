import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dft_matrix(n):
    """Unitary DFT matrix built entry by entry."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dense_circulant(c):
    """circ(c) with column q equal to c cyclically shifted down by q."""
    n = len(c)
    C = np.zeros((n, n))
    for q in range(n):
        for i in range(n):
            C[i, q] = c[(i - q) % n]
    return C


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
