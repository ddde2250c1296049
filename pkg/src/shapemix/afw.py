"""Away-step Frank-Wolfe for the cubic-regularized Newton subproblem.

The subproblem at a centre ``w`` is

    min_{z in C}  h(z) = f(w) + <g, z - w> + q(z) / 2 + (L / 6) q(z)^{3/2},
    q(z) = (z - w)^T H (z - w),

with ``g`` and ``H`` the gradient and Hessian of the objective at ``w``.
Every quantity the method needs is an M-vector, so the solver works with
Hessian-vector products supplied by :class:`LocalModel`. Two backends exist:
a dense M x M Hessian formed once per centre, and per-sample passes that
never form it (cheaper when M is large compared with N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import _kernels as _k
from . import polytope as pt
from .exceptions import InfeasiblePointError
from .objective import POSITIVITY_FLOOR

#: Dense Hessians are used up to this dimension.
DENSE_HESSIAN_MAX_M = 3000
#: Iterations between exact re-synchronisations of the iterate.
RESYNC_EVERY = 100
#: Hessian-vector products of vertices are cached up to this many entries.
HV_CACHE_ENTRIES = 4_000_000

#: The model-decrease guard ignores excesses below this (relative) level,
#: which is the rounding noise of evaluating ``h(y) - f(w)``.
GUARD_SLACK = 1e-15


@dataclass(frozen=True)
class StoppingRule:
    """Relative change of the model value below ``tol`` or ``max_iter`` steps."""

    tol: float = 1e-10
    max_iter: int = 50_000
    criterion: str = "relative"


class ActiveSet:
    """Sparse convex combination of vertices plus the dense iterate.

    ``weights`` maps vertex ids to positive weights; ``z`` is their
    combination, rebuilt exactly by :meth:`resync`.
    """

    def __init__(self, constraint: pt.ShapeConstraint, weights: Dict):
        if not weights:
            raise ValueError("active set must be nonempty")
        self.constraint = constraint
        self.weights = {}
        for vid, lam in weights.items():
            pt.validate_id(constraint, vid)
            if lam < 0:
                raise ValueError("active-set weights must be nonnegative")
            if lam > 0:
                self.weights[vid] = float(lam)
        if not self.weights:
            raise ValueError("active set must contain a positive weight")
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"active-set weights sum to {total}, not 1")
        self.z = np.zeros(constraint.M)
        self.resync()

    @classmethod
    def vertex(cls, constraint, vid) -> "ActiveSet":
        return cls(constraint, {vid: 1.0})

    @classmethod
    def from_point(cls, constraint, w) -> "ActiveSet":
        """Decompose a feasible point into catalog vertices."""
        return cls(constraint, pt.decompose(constraint, w))

    def copy(self) -> "ActiveSet":
        new = ActiveSet.__new__(ActiveSet)
        new.constraint = self.constraint
        new.weights = dict(self.weights)
        new.z = self.z.copy()
        return new

    def resync(self) -> None:
        total = math.fsum(self.weights.values())
        self.weights = {vid: lam / total for vid, lam in self.weights.items()}
        self.z = pt.reconstruct(self.constraint, self.weights)

    def drift(self) -> float:
        return float(np.max(np.abs(pt.reconstruct(self.constraint, self.weights) - self.z)))

    def merge(self, other: "ActiveSet", t: float) -> "ActiveSet":
        """Active set for ``(1 - t) * self + t * other``."""
        weights = pt.combine([(1.0 - t, self.weights), (t, other.weights)])
        return ActiveSet(self.constraint, weights)

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"ActiveSet({len(self.weights)} vertices)"


@dataclass
class SubproblemResult:
    y: np.ndarray
    active: ActiveSet
    fw_gap: float
    iters: int
    objective: float
    guard_triggered: bool = False
    history: list = field(default_factory=list)


class LocalModel:
    """Gradient, Hessian-vector products and value offsets at a fixed centre."""

    def __init__(self, problem, w_center, backend: str = "auto"):
        w = np.asarray(w_center, dtype=float)
        if w.shape != (problem.M,):
            raise ValueError("centre has the wrong length")
        inner = problem.B.T @ w
        if np.any(inner <= POSITIVITY_FLOOR) or not np.all(np.isfinite(inner)):
            raise InfeasiblePointError("objective is +inf at the centre")
        self.problem = problem
        self.w = w.copy()
        self.N = problem.N
        self.f_center = -math.fsum(np.log(inner)) / self.N
        # C[i, j] = B_ij / <B_j, w>
        self.C = problem.B / inner
        self.g = -self.C.sum(axis=1) / self.N
        if backend == "auto":
            backend = "dense" if problem.M <= DENSE_HESSIAN_MAX_M else "samples"
        if backend not in ("dense", "samples"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.H = (self.C @ self.C.T) / self.N if backend == "dense" else None
        self.Hw = self.matvec(self.w)
        self._hv_storage = {}

    def hv_storage(self, constraint):
        """Per-constraint cache of vertex Hessian products (dense backend)."""
        store = self._hv_storage.get(constraint)
        if store is None:
            n = pt.catalog_size(constraint)
            rows = n if n * self.problem.M <= HV_CACHE_ENTRIES else 0
            store = (np.zeros((rows, self.problem.M)), np.zeros(n, dtype=np.bool_))
            self._hv_storage[constraint] = store
        return store

    def matvec(self, x) -> np.ndarray:
        """Hessian-vector product ``H x``."""
        if self.H is not None:
            return self.H @ x
        return self.C @ (self.C.T @ x) / self.N

    def vertex_matvec(self, constraint, vid) -> np.ndarray:
        lo, vals = pt.vertex_support(constraint, vid)
        hi = lo + vals.size
        if self.H is not None:
            return self.H[:, lo:hi] @ vals
        return self.C @ (vals @ self.C[lo:hi]) / self.N

    def value(self, dz, Hdz, L) -> float:
        """``h(w + dz)`` given ``Hdz = H dz``."""
        q = max(float(dz @ Hdz), 0.0)
        return self.f_center + float(self.g @ dz) + 0.5 * q + (L / 6.0) * q ** 1.5

    def gradient(self, dz, Hdz, L) -> np.ndarray:
        q = max(float(dz @ Hdz), 0.0)
        return self.g + (1.0 + 0.5 * L * math.sqrt(q)) * Hdz


def model_gradient(problem, w_center, L: float, z) -> np.ndarray:
    """Exact gradient of the cubic model at ``z``.

    ``grad f(w) + H (z - w) * (1 + (L / 2) * sqrt(q))`` with
    ``q = (z - w)^T H (z - w)``; the Hessian product uses one pass over the
    samples.
    """
    if L < 0:
        raise ValueError("L must be nonnegative")
    model = LocalModel(problem, w_center, backend="samples")
    dz = np.asarray(z, dtype=float) - model.w
    return model.gradient(dz, model.matvec(dz), L)


def line_search_cubic(problem, w_center, L: float, z, d, alpha_max: float) -> float:
    """Exact step along ``d`` for the cubic model, restricted to ``[0, alpha_max]``.

    The restriction is ``a + b t + c t^2 + (L/6)(q0 + q1 t + q2 t^2)^{3/2}``;
    its coefficients come from one Hessian-vector product, then the convex
    derivative is bisected.
    """
    if not alpha_max > 0:
        raise ValueError("alpha_max must be positive")
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        raise ValueError("direction must be nonzero")
    model = LocalModel(problem, w_center, backend="samples")
    dz = np.asarray(z, dtype=float) - model.w
    Hdz = model.matvec(dz)
    Hd = model.matvec(d)
    return _k.step_search(
        float(model.g @ d), float(dz @ Hdz), 2.0 * float(dz @ Hd), float(d @ Hd), L, alpha_max
    )


def solve_subproblem(
    problem,
    w_center,
    L: float,
    constraint: pt.ShapeConstraint,
    start: Optional[ActiveSet] = None,
    stop: Optional[StoppingRule] = None,
    model: Optional[LocalModel] = None,
    record_history: bool = False,
) -> SubproblemResult:
    """Minimise the cubic model over ``constraint`` by away-step Frank-Wolfe.

    Parameters
    ----------
    start : ActiveSet, optional
        Feasible starting combination. The default is the single vertex
        returned by the linear oracle on the model gradient at the centre.
    model : LocalModel, optional
        Precomputed model at ``w_center``; reusing it across retries with
        different ``L`` saves the Hessian construction.

    Returns
    -------
    SubproblemResult
        If the final point has a model value above ``f(w_center)``, the
        centre itself is returned and ``guard_triggered`` is set.
    """
    if not L >= 0:
        raise ValueError("L must be nonnegative")
    stop = stop or StoppingRule()
    if model is None:
        model = LocalModel(problem, w_center)
    w = model.w
    c = constraint
    if c.M != problem.M:
        raise ValueError("constraint dimension does not match the problem")

    if start is None:
        vid, _ = pt.lp_oracle(c, model.g)
        act = ActiveSet.vertex(c, vid)
    else:
        if start.constraint != c:
            raise ValueError("start belongs to a different constraint")
        act = start.copy()
        act.resync()
        if not pt.membership(c, act.z, 1e-9):
            raise ValueError("start point is infeasible")
    start_set = act.copy()

    lam = np.zeros(pt.catalog_size(c))
    for vid, wt in act.weights.items():
        lam[pt.catalog_index(c, vid)] = wt
    if model.H is not None and _k.HAVE_NUMBA:
        pa, pb, pc0, pc1 = pt.piece_table(c)
        cache, cached = model.hv_storage(c)
        hist = np.empty(stop.max_iter + 1 if record_history else 0)
        it, _, _ = _k.afw_dense(
            model.H, model.g, model.Hw, w, model.f_center, float(L), pa, pb, pc0, pc1,
            lam, float(stop.tol), int(stop.max_iter), stop.criterion == "gap",
            RESYNC_EVERY, cache, cached, hist,
        )
        history = hist[: it + 1].tolist()
    else:
        it, history = _afw_numpy(model, c, lam, L, stop, record_history)

    idx = np.flatnonzero(lam > 0)
    act = ActiveSet(c, {pt.id_at(c, int(i)): float(lam[i]) for i in idx})
    y = act.z.copy()
    dz = y - w
    Hdz = model.matvec(dz)
    h = model.value(dz, Hdz, L)
    grad = model.gradient(dz, Hdz, L)
    fw_gap = float(grad @ y) - float(pt.catalog_values(c, grad).min())

    qy = max(float(dz @ Hdz), 0.0)
    excess = float(model.g @ dz) + 0.5 * qy + (L / 6.0) * qy ** 1.5
    if excess > GUARD_SLACK * max(1.0, abs(model.f_center)):
        if np.max(np.abs(start_set.z - w)) <= 1e-12:
            centre_set = start_set
        else:
            centre_set = ActiveSet.from_point(c, w)
        gap0 = float(model.g @ w) - float(pt.catalog_values(c, model.g).min())
        return SubproblemResult(w.copy(), centre_set, gap0, it, model.f_center, True, history)
    return SubproblemResult(y, act, fw_gap, it, h, False, history)


def _afw_numpy(model, c, lam, L, stop, record_history):
    """Reference loop used with the per-sample backend; updates ``lam``."""
    w = model.w
    supports: Dict[int, tuple] = {}
    hv_cache: Dict[int, np.ndarray] = {}

    def support(idx):
        out = supports.get(idx)
        if out is None:
            out = pt.vertex_support(c, pt.id_at(c, idx))
            supports[idx] = out
        return out

    def hv(idx):
        out = hv_cache.get(idx)
        if out is None:
            lo, vals = support(idx)
            out = model.C @ (vals @ model.C[lo : lo + vals.size]) / model.N
            hv_cache[idx] = out
        return out

    def rebuild():
        idx = np.flatnonzero(lam > 0)
        lam[idx] /= math.fsum(lam[idx])
        z = np.zeros(c.M)
        for i in idx:
            lo, vals = support(i)
            z[lo : lo + vals.size] += lam[i] * vals
        return z

    z = rebuild()
    dz = z - w
    Hdz = model.matvec(dz)
    h = model.value(dz, Hdz, L)
    history = [h] if record_history else []
    it = 0
    while it < stop.max_iter:
        q0 = max(float(dz @ Hdz), 0.0)
        grad = model.g + (1.0 + 0.5 * L * math.sqrt(q0)) * Hdz
        vals = pt.catalog_values(c, grad)
        s_idx = int(np.argmin(vals))
        gz = float(grad @ z)
        fw_gap = gz - float(vals[s_idx])
        if fw_gap <= 0.0:
            break
        if stop.criterion == "gap" and fw_gap <= stop.tol * max(abs(h), 1.0):
            break
        active = np.flatnonzero(lam > 0)
        v_idx = int(active[np.argmax(vals[active])])
        away_gap = float(vals[v_idx]) - gz

        Hz = Hdz + model.Hw
        if -fw_gap < -away_gap:
            is_fw = True
            lo, sv = support(s_idx)
            d = -z
            d[lo : lo + sv.size] += sv
            Hd = hv(s_idx) - Hz
            alpha_max = 1.0
        else:
            is_fw = False
            lam_v = lam[v_idx]
            lo, vv = support(v_idx)
            d = z.copy()
            d[lo : lo + vv.size] -= vv
            Hd = Hz - hv(v_idx)
            alpha_max = lam_v / (1.0 - lam_v) if lam_v < 1.0 else math.inf
        lin = float(model.g @ d)
        q1 = 2.0 * float(dz @ Hd)
        q2 = float(d @ Hd)
        alpha = _k.step_search(lin, q0, q1, q2, L, alpha_max)
        it += 1
        if alpha <= 0.0:
            break
        Qa = max(q0 + alpha * (q1 + alpha * q2), 0.0)
        delta = alpha * lin + 0.5 * alpha * (q1 + alpha * q2) + (L / 6.0) * (Qa ** 1.5 - q0 ** 1.5)

        dropped = False
        if is_fw:
            if alpha >= 1.0:
                lam[:] = 0.0
                lam[s_idx] = 1.0
                dropped = True
            else:
                lam *= 1.0 - alpha
                lam[s_idx] += alpha
        else:
            lam *= 1.0 + alpha
            lam[v_idx] -= alpha
            if alpha >= alpha_max or lam[v_idx] <= 0.0:
                lam[v_idx] = 0.0
                dropped = True
                hv_cache.pop(v_idx, None)

        z += alpha * d
        dz += alpha * d
        Hdz += alpha * Hd
        h_prev = h
        h = h + delta
        if it % RESYNC_EVERY == 0 or dropped:
            z = rebuild()
            dz = z - w
            Hdz = model.matvec(dz)
            h = model.value(dz, Hdz, L)
        if record_history:
            history.append(h)
        if stop.criterion == "relative" and not dropped and abs(h_prev - h) / max(abs(h_prev), 1.0) < stop.tol:
            break
    return it, history
