"""Shape-constraint polytopes, their vertex catalogs and linear oracles.

Every feasible set is ``{w : sum(w) = 1, w >= 0} ∩ S`` for a polyhedral shape
set S. Each vertex is a piecewise-linear sequence made of at most two linear
pieces, so an inner product ``<g, v>`` costs O(1) once the prefix sums

    P[t] = sum_{l <= t} g_l,    Q[t] = sum_{l <= t} l * g_l

are known (indices are 1-based throughout this module, matching vertex ids).

Vertex ids and catalog order
----------------------------
==================== =========================== ===================
family               id                          catalog order
==================== =========================== ===================
simplex              i in 1..M                   ascending i
decreasing           j in 1..M (1/j on [1, j])    ascending j
increasing           j in 1..M (flat on [j, M])   ascending j
concave              j in 1..M (peak at M, tent   ascending j
                     at j, peak at 1)
convex               ("left"|"right", k),         all left, then right;
                     k in 1..M-1                  ascending k
concave_increasing   i in 1..M                   ascending i
concave_decreasing   i in 1..M (mirror)          ascending i
convex_increasing    i in 1..M                   ascending i
convex_decreasing    i in 1..M (mirror)          ascending i
unimodal_fixed(k)    (k1, k2), k1 <= k <= k2      lexicographic
==================== =========================== ===================

Ties in :func:`lp_oracle` and :func:`away_oracle` go to the first id in
catalog order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import nnls

FAMILIES = (
    "simplex",
    "decreasing",
    "increasing",
    "concave",
    "convex",
    "concave_increasing",
    "concave_decreasing",
    "convex_increasing",
    "convex_decreasing",
    "unimodal_fixed",
)

_MIRROR = {
    "concave_decreasing": "concave_increasing",
    "convex_decreasing": "convex_increasing",
}

VertexId = Hashable
# (a, b, c0, c1): value c0 + c1 * l for l in [a, b] (1-based, inclusive)
Piece = Tuple[int, int, float, float]


@dataclass(frozen=True)
class ShapeConstraint:
    """A feasible set: the simplex intersected with a shape restriction."""

    kind: str
    M: int
    mode: Optional[int] = None

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown constraint family {self.kind!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if self.kind == "unimodal_fixed":
            if self.mode is None or not 1 <= self.mode <= self.M:
                raise ValueError("unimodal_fixed needs a mode k with 1 <= k <= M")
        elif self.mode is not None:
            raise ValueError("mode is only meaningful for unimodal_fixed")

    @classmethod
    def unimodal(cls, M: int, k: int) -> "ShapeConstraint":
        return cls("unimodal_fixed", M, k)

    def __str__(self):
        if self.kind == "unimodal_fixed":
            return f"unimodal_fixed(k={self.mode}, M={self.M})"
        return f"{self.kind}(M={self.M})"


class OpCounter:
    """Counts elementary array entries touched by the linear oracles."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)


#: Global instrumentation used by the oracle-complexity checks.
OPS = OpCounter()


# ---------------------------------------------------------------------------
# catalog ids
# ---------------------------------------------------------------------------


def catalog_size(c: ShapeConstraint) -> int:
    M = c.M
    if c.kind == "convex":
        return 1 if M == 1 else 2 * (M - 1)
    if c.kind == "unimodal_fixed":
        return c.mode * (M - c.mode + 1)
    return M


def catalog_ids(c: ShapeConstraint) -> List[VertexId]:
    M = c.M
    if c.kind == "convex":
        if M == 1:
            return [("left", 1)]
        return [("left", k) for k in range(1, M)] + [("right", k) for k in range(1, M)]
    if c.kind == "unimodal_fixed":
        k = c.mode
        return [(k1, k2) for k1 in range(1, k + 1) for k2 in range(k, M + 1)]
    return list(range(1, M + 1))


def _order_key(vid):
    if isinstance(vid, tuple) and isinstance(vid[0], str):
        return (0 if vid[0] == "left" else 1, vid[1])
    return vid


def validate_id(c: ShapeConstraint, vid) -> None:
    M = c.M
    ok = False
    if c.kind == "convex":
        ok = (
            isinstance(vid, tuple)
            and len(vid) == 2
            and vid[0] in ("left", "right")
            and isinstance(vid[1], (int, np.integer))
            and (1 <= vid[1] <= max(M - 1, 1))
            and not (M == 1 and vid[0] == "right")
        )
    elif c.kind == "unimodal_fixed":
        ok = (
            isinstance(vid, tuple)
            and len(vid) == 2
            and all(isinstance(x, (int, np.integer)) for x in vid)
            and 1 <= vid[0] <= c.mode <= vid[1] <= M
        )
    else:
        ok = isinstance(vid, (int, np.integer)) and 1 <= vid <= M
    if not ok:
        raise ValueError(f"invalid vertex id {vid!r} for {c}")


# ---------------------------------------------------------------------------
# closed-form vertices as linear pieces
# ---------------------------------------------------------------------------


def _mirror_pieces(pieces, M):
    # l -> M + 1 - l
    return [(M + 1 - b, M + 1 - a, c0 + c1 * (M + 1), -c1) for a, b, c0, c1 in pieces]


def vertex_pieces(c: ShapeConstraint, vid) -> List[Piece]:
    """Linear pieces describing vertex ``vid`` (zero outside the pieces)."""
    validate_id(c, vid)
    M = c.M
    kind = c.kind
    if kind in _MIRROR:
        base = ShapeConstraint(_MIRROR[kind], M)
        return _mirror_pieces(vertex_pieces(base, vid), M)
    if M == 1:
        return [(1, 1, 1.0, 0.0)]
    if kind == "simplex":
        return [(vid, vid, 1.0, 0.0)]
    if kind == "decreasing":
        return [(1, vid, 1.0 / vid, 0.0)]
    if kind == "increasing":
        return [(vid, M, 1.0 / (M - vid + 1), 0.0)]
    if kind == "concave":
        j = vid
        if j == 1:
            s = 2.0 / (M * (M - 1))
            return [(1, M, -s, s)]
        if j == M:
            s = 2.0 / (M * (M - 1))
            return [(1, M, s * M, -s)]
        p = 2.0 / ((M - 1) * (j - 1))
        q = 2.0 / ((M - 1) * (M - j))
        return [(1, j, -p, p), (j + 1, M, q * M, -q)]
    if kind == "convex":
        side, k = vid
        a = k * (k + 1) / 2.0
        if side == "left":
            return [(M - k + 1, M, -(M - k) / a, 1.0 / a)]
        return [(1, k, (k + 1) / a, -1.0 / a)]
    if kind == "concave_increasing":
        i = vid
        if i == 1:
            return [(1, M, 1.0 / M, 0.0)]
        r = 2.0 / ((2 * M - i) * (i - 1))
        pieces = [(1, i, -r, r)]
        if i < M:
            pieces.append((i + 1, M, (i - 1) * r, 0.0))
        return pieces
    if kind == "convex_increasing":
        i = vid
        if i == M:
            return [(1, M, 1.0 / M, 0.0)]
        s = 2.0 / (i * (i + 1))
        return [(M - i + 1, M, -(M - i) * s, s)]
    if kind == "unimodal_fixed":
        k1, k2 = vid
        return [(k1, k2, 1.0 / (k2 - k1 + 1), 0.0)]
    raise AssertionError(kind)


def vertex_vector(c: ShapeConstraint, vid) -> np.ndarray:
    """Dense length-M vertex for ``vid``."""
    v = np.zeros(c.M)
    for a, b, c0, c1 in vertex_pieces(c, vid):
        idx = np.arange(a, b + 1)
        v[a - 1 : b] = c0 + c1 * idx
    return v


def vertex_support(c: ShapeConstraint, vid):
    """``(lo, values)`` with the vertex equal to ``values`` on ``lo:lo+len``."""
    pieces = vertex_pieces(c, vid)
    a = min(p[0] for p in pieces)
    b = max(p[1] for p in pieces)
    vals = np.zeros(b - a + 1)
    for pa, pb, c0, c1 in pieces:
        vals[pa - a : pb - a + 1] = c0 + c1 * np.arange(pa, pb + 1)
    return a - 1, vals


def enumerate_vertices(c: ShapeConstraint) -> List[np.ndarray]:
    """Full vertex catalog in documented order."""
    return [vertex_vector(c, vid) for vid in catalog_ids(c)]


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


class PrefixSums:
    """Prefix sums of g and of l * g (1-based), padded with a leading zero."""

    def __init__(self, g):
        g = np.asarray(g, dtype=float)
        self.M = g.size
        ell = np.arange(1, self.M + 1, dtype=float)
        self.P = np.concatenate(([0.0], np.cumsum(g)))
        self.Q = np.concatenate(([0.0], np.cumsum(ell * g)))

    def S(self, a, b):
        return self.P[b] - self.P[a - 1]

    def T(self, a, b):
        return self.Q[b] - self.Q[a - 1]

    def piece_dot(self, pieces) -> float:
        return float(sum(c0 * self.S(a, b) + c1 * self.T(a, b) for a, b, c0, c1 in pieces))


def _catalog_values_base(kind, M, mode, g):
    """Inner products of g with every vertex, in catalog order."""
    if M == 1:
        return np.array([g[0]])
    if kind == "simplex":
        return g.copy()
    pre = PrefixSums(g)
    P, Q = pre.P, pre.Q
    if kind == "decreasing":
        j = np.arange(1, M + 1)
        return P[1:] / j
    if kind == "increasing":
        j = np.arange(1, M + 1)
        return (P[M] - P[j - 1]) / (M - j + 1)
    if kind == "concave":
        out = np.empty(M)
        s = 2.0 / (M * (M - 1))
        out[0] = s * (Q[M] - P[M])
        out[M - 1] = s * (M * P[M] - Q[M])
        if M > 2:
            j = np.arange(2, M)
            p = 2.0 / ((M - 1) * (j - 1))
            q = 2.0 / ((M - 1) * (M - j))
            left = Q[j] - P[j]
            right = M * (P[M] - P[j]) - (Q[M] - Q[j])
            out[1 : M - 1] = p * left + q * right
        return out
    if kind == "convex":
        k = np.arange(1, M)
        a = k * (k + 1) / 2.0
        start = M - k + 1
        S_left = P[M] - P[start - 1]
        T_left = Q[M] - Q[start - 1]
        left = (T_left - (M - k) * S_left) / a
        right = ((k + 1) * P[k] - Q[k]) / a
        return np.concatenate((left, right))
    if kind == "concave_increasing":
        out = np.empty(M)
        out[0] = P[M] / M
        i = np.arange(2, M + 1)
        r = 2.0 / ((2 * M - i) * (i - 1))
        out[1:] = r * ((Q[i] - P[i]) + (i - 1) * (P[M] - P[i]))
        return out
    if kind == "convex_increasing":
        out = np.empty(M)
        i = np.arange(1, M)
        s = 2.0 / (i * (i + 1))
        start = M - i + 1
        out[: M - 1] = s * ((Q[M] - Q[start - 1]) - (M - i) * (P[M] - P[start - 1]))
        out[M - 1] = P[M] / M
        return out
    if kind == "unimodal_fixed":
        k = mode
        k1 = np.arange(1, k + 1)[:, None]
        k2 = np.arange(k, M + 1)[None, :]
        return ((P[k2] - P[k1 - 1]) / (k2 - k1 + 1)).ravel()
    raise AssertionError(kind)


def catalog_values(c: ShapeConstraint, g) -> np.ndarray:
    """``<g, v>`` for every catalog vertex, in catalog order; O(catalog) work."""
    g = np.asarray(g, dtype=float)
    if g.shape != (c.M,):
        raise ValueError(f"g must have length {c.M}")
    kind = c.kind
    if kind in _MIRROR:
        # mirrored vertex i is the base vertex i reversed
        kind = _MIRROR[kind]
        g = g[::-1]
    OPS.add(c.M + catalog_size(c))
    return _catalog_values_base(kind, c.M, c.mode, g)


def lp_oracle(c: ShapeConstraint, g) -> Tuple[VertexId, float]:
    """Minimise ``<g, w>`` over the polytope; returns ``(vertex id, value)``."""
    vals = catalog_values(c, g)
    idx = int(np.argmin(vals))
    return _id_at(c, idx), float(vals[idx])


def _id_at(c, idx):
    M = c.M
    if c.kind == "convex":
        if M == 1:
            return ("left", 1)
        return ("left", idx + 1) if idx < M - 1 else ("right", idx - (M - 1) + 1)
    if c.kind == "unimodal_fixed":
        width = M - c.mode + 1
        return (idx // width + 1, c.mode + idx % width)
    return idx + 1


def vertex_dot(c: ShapeConstraint, vid, prefix: PrefixSums) -> float:
    """``<g, v>`` for one vertex using precomputed prefix sums of g."""
    return prefix.piece_dot(vertex_pieces(c, vid))


def away_oracle(c: ShapeConstraint, active, g) -> VertexId:
    """Active vertex maximising ``<g, v>``; ties go to the smallest id.

    ``active`` is a mapping or iterable of ``(id, weight)`` pairs.
    """
    items = list(active.items()) if hasattr(active, "items") else list(active)
    if not items:
        raise ValueError("active set is empty")
    pre = PrefixSums(g)
    best_id, best_val = None, -np.inf
    for vid, _ in sorted(items, key=lambda it: _order_key(it[0])):
        val = vertex_dot(c, vid, pre)
        if val > best_val:
            best_id, best_val = vid, val
    return best_id


# ---------------------------------------------------------------------------
# membership and decomposition
# ---------------------------------------------------------------------------


def shape_inequalities(c: ShapeConstraint) -> np.ndarray:
    """Rows ``a`` of the defining inequalities ``a @ w >= 0`` (excluding w >= 0)."""
    M = c.M
    rows = []

    def diff(i, j):  # w_i - w_j (1-based)
        r = np.zeros(M)
        r[i - 1] += 1.0
        r[j - 1] -= 1.0
        return r

    def second(i, sign):  # sign * (2 w_i - w_{i-1} - w_{i+1})
        r = np.zeros(M)
        r[i - 1] = 2.0 * sign
        r[i - 2] = -sign
        r[i] = -sign
        return r

    kind = c.kind
    if kind in ("decreasing", "concave_decreasing", "convex_decreasing"):
        rows += [diff(i, i + 1) for i in range(1, M)]
    if kind in ("increasing", "concave_increasing", "convex_increasing"):
        rows += [diff(i + 1, i) for i in range(1, M)]
    if kind in ("concave", "concave_increasing", "concave_decreasing"):
        rows += [second(i, 1.0) for i in range(2, M)]
    if kind in ("convex", "convex_increasing", "convex_decreasing"):
        rows += [second(i, -1.0) for i in range(2, M)]
    if kind == "unimodal_fixed":
        k = c.mode
        rows += [diff(i, i - 1) for i in range(2, k + 1)]
        rows += [diff(i, i + 1) for i in range(k, M)]
    if not rows:
        return np.zeros((0, M))
    return np.vstack(rows)


def membership(c: ShapeConstraint, w, tol: float = 1e-12) -> bool:
    """True iff every defining equality and inequality holds within ``tol``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (c.M,) or not np.all(np.isfinite(w)):
        return False
    if abs(w.sum() - 1.0) > tol or np.any(w < -tol):
        return False
    A = shape_inequalities(c)
    return bool(A.size == 0 or np.all(A @ w >= -tol))


def _layer_cake(c, w):
    """Exact decomposition for window-average families (unimodal, monotone)."""
    M = c.M
    k = c.mode if c.kind == "unimodal_fixed" else (1 if c.kind == "decreasing" else M)
    levels = np.unique(w[w > 0])
    weights = {}
    prev = 0.0
    for t in levels:
        idx = np.flatnonzero(w >= t)
        k1, k2 = int(idx[0]) + 1, int(idx[-1]) + 1
        k1, k2 = min(k1, k), max(k2, k)
        if c.kind == "unimodal_fixed":
            vid = (k1, k2)
        elif c.kind == "decreasing":
            vid = k2
        else:
            vid = k1
        lam = (t - prev) * (k2 - k1 + 1)
        weights[vid] = weights.get(vid, 0.0) + lam
        prev = t
    return weights


def decompose(c: ShapeConstraint, w, tol: float = 1e-9) -> dict:
    """Write a feasible ``w`` as a convex combination of catalog vertices.

    Returns ``{vertex id: weight}`` with positive weights summing to one.
    Closed forms are used for the simplex, monotone and unimodal families;
    other families fall back to nonnegative least squares over the catalog.
    """
    w = np.asarray(w, dtype=float)
    if not membership(c, w, tol):
        raise ValueError(f"point is not feasible for {c}")
    w = np.clip(w, 0.0, None)
    if c.M == 1:
        return {catalog_ids(c)[0]: 1.0}
    if c.kind == "simplex":
        weights = {i + 1: float(x) for i, x in enumerate(w) if x > 0}
    elif c.kind in ("decreasing", "increasing", "unimodal_fixed"):
        weights = _layer_cake(c, w)
    else:
        ids = catalog_ids(c)
        V = np.column_stack([vertex_vector(c, vid) for vid in ids])
        A = np.vstack([V, np.ones(len(ids))])
        lam, _ = nnls(A, np.concatenate([w, [1.0]]))
        weights = {vid: float(x) for vid, x in zip(ids, lam) if x > 0}
    total = sum(weights.values())
    return {vid: x / total for vid, x in weights.items() if x > 0}


def combine(points: Sequence[Tuple[float, dict]]) -> dict:
    """Convex combination of several vertex-weight maps."""
    out: dict = {}
    for coef, weights in points:
        if coef == 0:
            continue
        for vid, lam in weights.items():
            out[vid] = out.get(vid, 0.0) + coef * lam
    return {vid: x for vid, x in out.items() if x > 0}


def reconstruct(c: ShapeConstraint, weights) -> np.ndarray:
    """Dense ``sum_v lambda_v v`` for a vertex-weight map."""
    z = np.zeros(c.M)
    for vid, lam in weights.items():
        lo, vals = vertex_support(c, vid)
        z[lo : lo + vals.size] += lam * vals
    return z


def uniform_weights(c: ShapeConstraint) -> dict:
    """Vertex weights representing the uniform vector ``(1/M) 1``."""
    M = c.M
    if M == 1:
        return {catalog_ids(c)[0]: 1.0}
    kind = c.kind
    if kind == "simplex":
        return {i: 1.0 / M for i in range(1, M + 1)}
    if kind == "decreasing":
        return {M: 1.0}
    if kind == "increasing":
        return {1: 1.0}
    if kind == "concave":
        return {1: 0.5, M: 0.5}
    if kind == "convex":
        return {("left", M - 1): 0.5, ("right", M - 1): 0.5}
    if kind in ("concave_increasing", "concave_decreasing"):
        return {1: 1.0}
    if kind in ("convex_increasing", "convex_decreasing"):
        return {M: 1.0}
    if kind == "unimodal_fixed":
        return {(1, M): 1.0}
    raise AssertionError(kind)


def catalog_index(c: ShapeConstraint, vid) -> int:
    """Position of ``vid`` in catalog order (inverse of the oracle's id map)."""
    validate_id(c, vid)
    M = c.M
    if c.kind == "convex":
        if M == 1:
            return 0
        side, k = vid
        return k - 1 if side == "left" else (M - 1) + k - 1
    if c.kind == "unimodal_fixed":
        k1, k2 = vid
        return (k1 - 1) * (M - c.mode + 1) + (k2 - c.mode)
    return vid - 1


def id_at(c: ShapeConstraint, idx: int):
    """Vertex id at catalog position ``idx``."""
    if not 0 <= idx < catalog_size(c):
        raise ValueError("catalog index out of range")
    return _id_at(c, idx)


@lru_cache(maxsize=64)
def piece_table(c: ShapeConstraint):
    """Arrays ``(a, b, c0, c1)`` of shape (catalog, 2) describing every vertex.

    Unused second pieces are empty windows ``a = 1, b = 0``. The table lets
    compiled code evaluate any family's oracle from prefix sums.
    """
    n = catalog_size(c)
    a = np.ones((n, 2), dtype=np.int64)
    b = np.zeros((n, 2), dtype=np.int64)
    c0 = np.zeros((n, 2))
    c1 = np.zeros((n, 2))
    for i, vid in enumerate(catalog_ids(c)):
        for p, (pa, pb, q0, q1) in enumerate(vertex_pieces(c, vid)):
            a[i, p], b[i, p], c0[i, p], c1[i, p] = pa, pb, q0, q1
    for arr in (a, b, c0, c1):
        arr.flags.writeable = False
    return a, b, c0, c1
