import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gausstree.extremal import pruefer_to_edges  # noqa: E402
from gausstree.model import model_from_edges  # noqa: E402


def random_tree_edges(rng, d):
    if d == 2:
        return [(1, 2)]
    return pruefer_to_edges([int(v) for v in rng.integers(1, d + 1, d - 2)], d)


def random_model(rng, d, lo=0.05, hi=0.95, signs=True):
    edges = random_tree_edges(rng, d)
    mags = rng.uniform(lo, hi, len(edges))
    if signs:
        mags = mags * rng.choice([-1.0, 1.0], len(edges))
    return model_from_edges(d, [(i, j, r) for (i, j), r in zip(edges, mags)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
