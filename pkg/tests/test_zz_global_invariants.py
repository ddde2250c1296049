"""Invariants over every solver trace recorded during the run.

The file name sorts last so the other modules have already populated the
trace collector when these run.
"""

import numpy as np

from shapemix import cubic_newton as cn
from shapemix import polytope as pt

from conftest import COLLECTED_TRACES, random_problem
from test_acceptance import record


def traces():
    if not COLLECTED_TRACES:
        # running this file alone: produce a few traces of its own
        rng = np.random.default_rng(9)
        for kind in ("simplex", "concave", "decreasing"):
            cn.minimize(random_problem(rng, 12, 200, kind="bernstein"), pt.ShapeConstraint(kind, 12))
    return list(COLLECTED_TRACES)


def test_criterion_04_curvature_bound():
    ts = traces()
    bad = sum(int(np.sum(t.L_values > max(48 * t.N, t.L0))) for t in ts)
    worst = max(float(np.max(t.L_values / max(48 * t.N, t.L0))) for t in ts)
    record(4, bad == 0, f"{len(ts)} traces, {bad} violations, max L / max(48N, L0) = {worst:.3g}")


def test_criterion_05_descent():
    ts = traces()
    rises = [float(np.max(np.diff(t.f_values), initial=-np.inf)) for t in ts]
    worst = max(rises)
    record(5, worst <= 1e-14, f"{len(ts)} traces, largest increase {worst:.2e}")
