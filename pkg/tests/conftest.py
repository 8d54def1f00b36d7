import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fd_jets(f, X, h1=1e-5, h2=1e-4):
    """Central differences of ``f: (N, n) -> (N, m)`` along every axis: (grads, diag2)."""
    n = X.shape[1]
    g, d = [], []
    f0 = f(X)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h1
        g.append((f(X + e) - f(X - e)) / (2 * h1))
        e[i] = h2
        d.append((f(X + e) - 2 * f0 + f(X - e)) / h2 ** 2)
    return np.stack(g), np.stack(d)


ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
