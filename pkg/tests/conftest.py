import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from threshnet import MarketSpec, generate_panel, normalize_returns, returns_from_panel  # noqa: E402


def random_returns(rng, n=None, t=None, common=None):
    n = int(rng.integers(3, 13)) if n is None else n
    t = int(rng.integers(3, 21)) if t is None else t
    common = rng.uniform(0, 1.5) if common is None else common
    raw = rng.standard_normal((n, t)) + common * rng.standard_normal(t)
    return normalize_returns(raw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def factor_returns():
    """Small single-factor panel shared by several modules' tests."""
    return returns_from_panel(generate_panel(MarketSpec(20, 300, market_beta=1.0, seed=7)))


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def record(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
