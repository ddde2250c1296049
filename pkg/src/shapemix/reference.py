"""Independent oracles for testing: an EM solver and a brute-force vertex finder.

Neither routine shares code with the solver modules, so agreement between
them and the solver is meaningful evidence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass
class EMState:
    """Result of an EM run."""

    w: np.ndarray
    iters: int
    last_update_norm: float
    converged: bool
    f_history: List[float]


def _em_f(B, w):
    inner = B.T @ w
    if np.any(inner <= 1e-300):
        return math.inf
    return -math.fsum(np.log(inner)) / B.shape[1]


def em_step(problem, w) -> np.ndarray:
    """One EM fixed-point update ``w_i <- w_i * mean_j(B_ij / <B_j, w>)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.M,):
        raise ValueError("w has the wrong length")
    if np.any(w <= 0):
        raise ValueError("EM needs strictly positive weights")
    inner = problem.B.T @ w
    if np.any(inner <= 1e-300):
        raise ValueError("objective is infinite at w")
    new = w * (problem.B @ (1.0 / inner)) / problem.N
    return new / new.sum()


def em_solve(problem, tol: float = 1e-12, max_iters: int = 200_000, w0=None,
             record_f: bool = False) -> EMState:
    """Iterate :func:`em_step` from the uniform vector until the sup-norm
    change drops below ``tol`` or ``max_iters`` steps were taken."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    M = problem.M
    w = np.full(M, 1.0 / M) if w0 is None else np.asarray(w0, dtype=float).copy()
    history = [_em_f(problem.B, w)] if record_f else []
    change = math.inf
    it = 0
    while it < max_iters:
        new = em_step(problem, w)
        change = float(np.max(np.abs(new - w)))
        w = new
        it += 1
        if record_f:
            history.append(_em_f(problem.B, w))
        if change < tol:
            return EMState(w, it, change, True, history)
    return EMState(w, it, change, False, history)


# ---------------------------------------------------------------------------
# brute-force vertex enumeration
# ---------------------------------------------------------------------------


def _inequality_rows(kind: str, M: int, mode=None) -> np.ndarray:
    """All rows ``a`` with ``a @ w >= 0`` defining the family (incl. w >= 0)."""
    rows = [np.eye(M)[i] for i in range(M)]

    def add(coefs):
        r = np.zeros(M)
        for idx, val in coefs:
            r[idx] += val
        rows.append(r)

    dec = kind in ("decreasing", "concave_decreasing", "convex_decreasing")
    inc = kind in ("increasing", "concave_increasing", "convex_increasing")
    cav = kind.startswith("concave")
    vex = kind.startswith("convex")
    for m in range(M - 1):
        if dec:
            add([(m, 1.0), (m + 1, -1.0)])
        if inc:
            add([(m + 1, 1.0), (m, -1.0)])
    for m in range(1, M - 1):
        if cav:
            add([(m, 2.0), (m - 1, -1.0), (m + 1, -1.0)])
        if vex:
            add([(m, -2.0), (m - 1, 1.0), (m + 1, 1.0)])
    if kind == "unimodal_fixed":
        k = mode - 1  # 0-based mode
        for m in range(M - 1):
            if m < k:
                add([(m + 1, 1.0), (m, -1.0)])
            else:
                add([(m, 1.0), (m + 1, -1.0)])
    elif kind not in ("simplex",) and not (dec or inc or cav or vex):
        raise ValueError(f"unknown family {kind!r}")
    return np.array(rows)


def brute_force_vertices(constraint, tol: float = 1e-10) -> List[np.ndarray]:
    """Vertices of a small polytope by exhaustive active-set enumeration.

    Every choice of M - 1 inequalities is made tight together with the
    equality ``sum(w) = 1``; nonsingular systems whose solution satisfies all
    inequalities are kept and duplicates are merged.
    """
    kind, M = constraint.kind, constraint.M
    if M > 5:
        raise ValueError("brute force enumeration is limited to M <= 5")
    A = _inequality_rows(kind, M, getattr(constraint, "mode", None))
    ones = np.ones(M)
    found: List[np.ndarray] = []
    for subset in itertools.combinations(range(A.shape[0]), M - 1):
        system = np.vstack([A[list(subset)], ones]) if subset else ones[None, :]
        if np.linalg.matrix_rank(system, tol=1e-12) < M:
            continue
        rhs = np.zeros(M)
        rhs[-1] = 1.0
        x = np.linalg.solve(system, rhs)
        if np.all(A @ x >= -tol) and not any(np.max(np.abs(x - v)) <= tol for v in found):
            found.append(x)
    return found
