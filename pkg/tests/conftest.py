import numpy as np
import pytest
from hypothesis import settings

from chlim.banded import BandedOperator

# wall-clock deadlines are noise on a loaded single core
settings.register_profile("chlim", deadline=None)
settings.load_profile("chlim")


def random_banded(rng, n, lower=2, upper=2, dominant=False):
    a = rng.standard_normal((n, n))
    mask = np.triu(np.tril(np.ones((n, n)), upper), -lower)
    a *= mask
    if dominant:
        a += np.diag(np.abs(a).sum(axis=1) + 1.0)
    return BandedOperator.from_dense(a, lower, upper), a


def dense_laplacian(n):
    """-Delta_h with Neumann ghost cells, written out entry by entry."""
    h = 1.0 / n
    a = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            a[i, i - 1] = -1.0
            a[i, i] += 1.0
        if i < n - 1:
            a[i, i + 1] = -1.0
            a[i, i] += 1.0
    return a / h**2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
