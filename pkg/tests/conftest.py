import json
from pathlib import Path

import numpy as np
import pytest

from shapemix import basis as bs
from shapemix import cubic_newton as cn
from shapemix import synth

DATA = Path(__file__).parent / "data"

# Every finished solve anywhere in the suite lands here; the global invariant
# checks at the end of the run read it.
COLLECTED_TRACES = []
cn.TRACE_LISTENERS.append(COLLECTED_TRACES.append)


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_problem(rng, M, N, kind="gaussian"):
    """Small random instance with well-spread positive entries."""
    if kind == "bernstein":
        return bs.bernstein_matrix(rng.uniform(0.02, 0.98, N), M)
    x = rng.normal(size=N)
    locs = np.linspace(x.min(), x.max(), M) if M > 1 else np.array([0.0])
    return bs.gaussian_location_matrix(x, locs, 1.0)


def interior_point(rng, M):
    w = rng.uniform(0.2, 1.0, M)
    return w / w.sum()


# The fixed end-to-end instance shared by several acceptance criteria.
GAUSS5_SEED = 2024
GAUSS5_N = 20_000
GAUSS5_M = 100
GAUSS5_SIGMA = 0.2


def gauss5_problem():
    x = synth.sample("gauss5", GAUSS5_N, GAUSS5_SEED)
    return bs.gaussian_location_matrix(x, bs.uniform_location_grid(x, GAUSS5_M), GAUSS5_SIGMA)


@pytest.fixture(scope="session")
def gauss5():
    return gauss5_problem()


@pytest.fixture(scope="session")
def gauss5_solution(gauss5):
    from shapemix import polytope as pt

    return cn.minimize(gauss5, pt.ShapeConstraint("simplex", GAUSS5_M), cn.SolverConfig())


# One "criterion N: PASS|FAIL ..." line per acceptance criterion, echoed at
# the end of the run so it is visible without -s.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
