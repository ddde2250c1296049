"""Cubic-regularized Newton method with an adaptive regularization constant.

Each outer step solves the cubic model around the current iterate with
away-step Frank-Wolfe, increases ``L`` until the sufficient-decrease test
holds, then picks the next iterate (optionally a shortened step). The loop
stops on a Frank-Wolfe gap certificate for the true objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import objective as obj
from . import polytope as pt
from .afw import ActiveSet, LocalModel, StoppingRule, solve_subproblem

#: Callables invoked with every finished :class:`SolveTrace` (test hooks).
TRACE_LISTENERS: List[Callable] = []

#: Safety cap on consecutive increases of L within one outer step.
MAX_RETRIES = 200


def default_subproblem_tol(k: int) -> float:
    if k <= 3:
        return 1e-8
    if k <= 9:
        return 1e-9
    return 1e-10


@dataclass
class SolverConfig:
    """Parameters of the outer loop. Defaults follow the reference setup.

    ``gamma(k)`` and ``rho(k)`` default to ``0.8 ** k``. Steps with index
    ``k <= shorter_step_iters`` first try ``w + shorter_step_factor * (y - w)``.
    """

    L0: float = 3.0 / math.sqrt(2.0)
    beta: float = 1.5
    gamma: Callable[[int], float] = lambda k: 0.8 ** k
    rho: Callable[[int], float] = lambda k: 0.8 ** k
    shorter_step_iters: int = 10
    shorter_step_factor: float = 0.5
    subproblem_tol: Callable[[int], float] = default_subproblem_tol
    subproblem_max_iter: int = 50_000
    gap_tol: float = 1e-6
    outer_tol: float = 1e-10
    max_outer: int = 500
    backend: str = "auto"
    subproblem_criterion: str = "gap"

    def __post_init__(self):
        if not self.L0 > 0:
            raise ValueError("L0 must be positive")
        if not 1.0 < self.beta < 2.0:
            raise ValueError("beta must lie strictly between 1 and 2")
        if not 0.0 < self.shorter_step_factor <= 1.0:
            raise ValueError("shorter_step_factor must lie in (0, 1]")
        if self.gap_tol < 0 or self.outer_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if int(self.max_outer) != self.max_outer or self.max_outer < 0:
            raise ValueError("max_outer must be a nonnegative integer")


@dataclass
class TraceRecord:
    k: int
    f: float
    L: float
    retries: int
    subiters: int
    fw_gap: float
    step: str


@dataclass
class SolveTrace:
    records: List[TraceRecord] = field(default_factory=list)
    status: str = "running"
    N: int = 0
    L0: float = 0.0

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    @property
    def L_values(self) -> np.ndarray:
        return np.array([r.L for r in self.records])

    @property
    def outer_iters(self) -> int:
        return len(self.records) - 1

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]


def fw_gap_at(constraint, w, g) -> float:
    """``max_{v in C} <g, w - v>`` via one linear-oracle call."""
    return float(g @ w) - float(pt.catalog_values(constraint, g).min())


def acceptance_test(problem, w_k, y_k, L_k: float, gamma_k: float, u=None) -> bool:
    """Sufficient-decrease test ``f(y) <= h(y, w) + gamma``.

    Evaluated as ``f(y) - Phi(y, w) <= (L/6) q^{3/2} + gamma`` where the left
    side is a sum of third-order log remainders, avoiding cancellation
    between two nearly equal objective values.
    """
    if u is None:
        u = obj.relative_steps(problem, y_k, w_k)
    rem = obj.taylor_remainder(u)
    if not math.isfinite(rem):
        return False
    N = problem.N
    q = math.fsum(u * u) / N
    return rem / N <= (L_k / 6.0) * q ** 1.5 + gamma_k


def next_iterate(w_k, y_k, k: int, config: SolverConfig, problem, u=None) -> Tuple[np.ndarray, str]:
    """Choose the next iterate; returns ``(w_next, step)`` with step one of
    ``"short"``, ``"full"`` or ``"stall"``.

    Shortened step when it decreases f and is within ``rho(k)`` of f(y);
    otherwise y if it does not increase f; otherwise stay put.
    """
    w_k = np.asarray(w_k, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    if u is None:
        u = obj.relative_steps(problem, y_k, w_k)
    N = problem.N
    dy = obj.f_difference(u, N)
    if k <= config.shorter_step_iters:
        t = config.shorter_step_factor
        ds = obj.f_difference(t * u, N)
        if ds <= 0.0 and ds <= dy + config.rho(k):
            return w_k + t * (y_k - w_k), "short"
    if dy <= 0.0:
        return y_k.copy(), "full"
    return w_k.copy(), "stall"


def _project_roundoff(w):
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def minimize(problem, constraint: pt.ShapeConstraint, config: Optional[SolverConfig] = None,
             w0=None) -> Tuple[np.ndarray, SolveTrace]:
    """Minimise the negative log-likelihood over ``constraint``.

    Returns the final iterate and its trace. ``trace.status`` is
    ``"converged"`` (gap certificate met), ``"stalled"`` (relative change in
    f below ``outer_tol``, or a step that could not move) or
    ``"iteration-capped"``.
    """
    cfg = config or SolverConfig()
    M = problem.M
    c = constraint
    if c.M != M:
        raise ValueError(f"constraint has M={c.M} but the problem has M={M}")
    if w0 is None:
        w = np.full(M, 1.0 / M)
        active = ActiveSet(c, pt.uniform_weights(c))
    else:
        w = np.asarray(w0, dtype=float).copy()
        if not pt.membership(c, w, 1e-9):
            raise ValueError("initial point is not feasible for the constraint")
        active = ActiveSet.from_point(c, w)
    fw = obj.f(problem, w)
    if not math.isfinite(fw):
        raise ValueError("objective is +inf at the initial point")

    trace = SolveTrace(N=problem.N, L0=cfg.L0)
    L = cfg.L0
    if M == 1:
        trace.records.append(TraceRecord(0, fw, L, 0, 0, 0.0, "init"))
        trace.status = "converged"
        _notify(trace)
        return w, trace

    model = LocalModel(problem, w, cfg.backend)
    gap = fw_gap_at(c, w, model.g)
    trace.records.append(TraceRecord(0, fw, L, 0, 0, gap, "init"))
    status = "iteration-capped"
    for k in range(cfg.max_outer + 1):
        if gap <= cfg.gap_tol * max(1.0, abs(fw)):
            status = "converged"
            break
        if k == cfg.max_outer:
            break
        # the model gap at the centre is the true gap, so the inner tolerance
        # must sit below the outer target or no step can certify it
        sub_tol = min(cfg.subproblem_tol(k), 0.5 * cfg.gap_tol)
        stop = StoppingRule(sub_tol, cfg.subproblem_max_iter, cfg.subproblem_criterion)
        retries = 0
        subiters = 0
        while True:
            res = solve_subproblem(problem, w, L, c, start=active, stop=stop, model=model)
            subiters += res.iters
            u = model.C.T @ (res.y - w)
            if acceptance_test(problem, w, res.y, L, cfg.gamma(k), u=u):
                break
            retries += 1
            if retries > MAX_RETRIES:
                raise RuntimeError("regularization constant failed to stabilise")
            L *= cfg.beta
        w_next, step = next_iterate(w, res.y, k, cfg, problem, u=u)
        if step == "short":
            active = active.merge(res.active, cfg.shorter_step_factor)
        elif step == "full":
            active = res.active
        w_next = _project_roundoff(w_next)
        f_next = obj.f(problem, w_next)
        if step != "stall":
            model = LocalModel(problem, w_next, cfg.backend)
            gap = fw_gap_at(c, w_next, model.g)
        change = abs(fw - f_next) / max(abs(fw), 1.0)
        trace.records.append(TraceRecord(k + 1, f_next, L, retries, subiters, gap, step))
        w, fw = w_next, f_next
        # an inner solve that never moved will repeat itself verbatim
        no_progress = res.iters == 0 or res.guard_triggered
        if step == "stall" or no_progress or change < cfg.outer_tol:
            status = "converged" if gap <= cfg.gap_tol * max(1.0, abs(fw)) else "stalled"
            break
    trace.status = status
    _notify(trace)
    return w, trace


def _notify(trace):
    for listener in TRACE_LISTENERS:
        listener(trace)


def fit_unimodal(problem, config: Optional[SolverConfig] = None, return_traces: bool = False):
    """Best unimodal fit over all mode positions.

    Solves the fixed-mode problem for every ``k`` in ``1..M`` from the
    uniform start and returns ``(k_star, w, per_mode_f)``; ``per_mode_f[k-1]``
    is the objective for mode ``k`` and ties go to the smallest ``k``.
    With ``return_traces`` the list of per-mode traces is appended.
    """
    M = problem.M
    per_mode = np.empty(M)
    sols = []
    traces = []
    for k in range(1, M + 1):
        w, tr = minimize(problem, pt.ShapeConstraint.unimodal(M, k), config)
        per_mode[k - 1] = obj.f(problem, w)
        sols.append(w)
        traces.append(tr)
    best = int(np.argmin(per_mode))
    if return_traces:
        return best + 1, sols[best], per_mode, traces
    return best + 1, sols[best], per_mode
