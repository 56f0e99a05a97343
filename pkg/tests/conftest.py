import numpy as np
import pytest

from copocut.model import BlockFeasibleSet


def simplex_set(n=2, radius=2.0):
    """{u >= 0, sum u = 1} written as (1'u)^2 = 1."""
    return BlockFeasibleSet(n, ((np.ones((n, n)), 1.0),), radius)


def random_ground_set(rng, n=3, m=None, radius=None):
    """Nonneg set cut out by m diagonal equalities u'Du = u0'Du0 through a known point u0."""
    m = int(rng.integers(0, n)) if m is None else m
    u0 = rng.uniform(0.0, 1.0, n)
    u0 *= rng.uniform(0.4, 0.8) / np.linalg.norm(u0)
    eqs = []
    for _ in range(m):
        D = np.diag(rng.uniform(2.0, 3.0, n))
        eqs.append((D, float(u0 @ D @ u0)))
    radius = float(rng.uniform(0.3, 1.0)) if radius is None else radius
    radius = max(radius, 1.5 * float(u0 @ u0))
    return BlockFeasibleSet(n, tuple(eqs), radius)


def random_symmetric(rng, n):
    X = rng.uniform(-1.0, 1.0, (n, n))
    return 0.5 * (X + X.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results: criterion -> (ok, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
