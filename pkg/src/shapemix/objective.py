"""Negative log-likelihood of mixture proportions and its local models.

Notation: ``f(w) = -(1/N) sum_j log <B_j, w>`` where ``B_j`` is column j of
the evaluation matrix. The Hessian quadratic form carries the 1/N factor,
``H(w)[d]^2 = (1/N) sum_j (<B_j, d> / <B_j, w>)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasiblePointError

#: Inner products at or below this make the objective +inf.
POSITIVITY_FLOOR = 1e-300


@dataclass(frozen=True)
class Ratios:
    """Per-sample inner products ``<B_j, w>`` and the sum of their logs."""

    inner: np.ndarray
    logsum: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.logsum)


def _check_vector(problem, v, name="w"):
    v = np.asarray(v, dtype=float)
    if v.shape != (problem.M,):
        raise ValueError(f"{name} must have length M={problem.M}, got shape {v.shape}")
    return v


def ratios(problem, w) -> Ratios:
    """Compute the inner products once; shared by f, grad and Hessian forms."""
    w = _check_vector(problem, w)
    inner = problem.B.T @ w
    if np.any(inner <= POSITIVITY_FLOOR) or not np.all(np.isfinite(inner)):
        return Ratios(inner, -math.inf)
    return Ratios(inner, math.fsum(np.log(inner)))


def f(problem, w) -> float:
    """Objective value; ``+inf`` when some inner product is not positive."""
    r = ratios(problem, w)
    if not r.finite:
        return math.inf
    return -r.logsum / problem.N


def _finite_ratios(problem, w):
    r = ratios(problem, w)
    if not r.finite:
        raise InfeasiblePointError("objective is +inf at this point")
    return r


def grad(problem, w, r: Ratios | None = None) -> np.ndarray:
    """Gradient ``g_i = -(1/N) sum_j B_ij / <B_j, w>``."""
    if r is None:
        r = _finite_ratios(problem, w)
    return -(problem.B @ (1.0 / r.inner)) / problem.N


def hess_quadratic_form(problem, w, d, r: Ratios | None = None) -> float:
    """``(1/N) sum_j (<B_j, d> / <B_j, w>)^2``, the squared local norm of d."""
    d = _check_vector(problem, d, "d")
    if r is None:
        r = _finite_ratios(problem, w)
    t = (problem.B.T @ d) / r.inner
    return math.fsum(t * t) / problem.N


def local_model_phi(problem, y, w) -> float:
    """Second-order Taylor model of f around ``w`` evaluated at ``y``."""
    y = _check_vector(problem, y, "y")
    r = _finite_ratios(problem, w)
    d = y - np.asarray(w, dtype=float)
    t = (problem.B.T @ d) / r.inner
    N = problem.N
    # <grad f(w), d> = -(1/N) sum_j t_j
    return -r.logsum / N - math.fsum(t) / N + 0.5 * math.fsum(t * t) / N


def cubic_model(problem, y, w, L: float) -> float:
    """Quadratic model plus ``(L/6) * H(w)[y - w]^{3/2}``."""
    if not L > 0:
        raise ValueError("L must be positive")
    y = _check_vector(problem, y, "y")
    r = _finite_ratios(problem, w)
    d = y - np.asarray(w, dtype=float)
    t = (problem.B.T @ d) / r.inner
    N = problem.N
    q = math.fsum(t * t) / N
    return -r.logsum / N - math.fsum(t) / N + 0.5 * q + (L / 6.0) * q ** 1.5


def relative_steps(problem, y, w, r: Ratios | None = None) -> np.ndarray:
    """``u_j = <B_j, y - w> / <B_j, w>``; then ``<B_j, y> = (1 + u_j) <B_j, w>``."""
    y = _check_vector(problem, y, "y")
    if r is None:
        r = _finite_ratios(problem, w)
    return (problem.B.T @ (y - np.asarray(w, dtype=float))) / r.inner


def f_difference(u: np.ndarray, N: int) -> float:
    """``f(y) - f(w)`` from relative steps, without cancellation against f(w)."""
    if np.any(u <= -1.0 + POSITIVITY_FLOOR):
        return math.inf
    return -math.fsum(np.log1p(u)) / N


# Coefficients of sum_{k>=3} (-1)^k u^k / k, truncated where |u| < 0.1 makes
# the tail negligible in double precision.
_SERIES_ORDER = 24


def taylor_remainder(u: np.ndarray) -> float:
    """``sum_j [-log(1 + u_j) + u_j - u_j^2 / 2]``, accurate for small u.

    This is ``N * (f(y) - Phi_f(y, w))`` when ``u`` are the relative steps.
    Returns +inf if some ``1 + u_j`` is not positive.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= -1.0 + POSITIVITY_FLOOR):
        return math.inf
    small = np.abs(u) < 0.1
    out = np.empty_like(u)
    us = u[small]
    acc = np.zeros_like(us)
    for k in range(_SERIES_ORDER, 2, -1):
        acc = acc * us + ((-1.0) ** k) / k
    out[small] = acc * us ** 3
    ub = u[~small]
    out[~small] = -np.log1p(ub) + ub - 0.5 * ub * ub
    return math.fsum(out)
