"""Compiled inner loops. Each function also runs as plain Python."""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

LINE_SEARCH_ITERS = 100
LINE_SEARCH_RTOL = 1e-12


def _phi_prime(alpha, lin, q0, q1, q2, L):
    Q = q0 + alpha * (q1 + alpha * q2)
    if Q < 0.0:
        Q = 0.0
    return lin + (q1 + 2.0 * q2 * alpha) * (0.5 + 0.25 * L * math.sqrt(Q))


def _phi_second(alpha, q0, q1, q2, L):
    Q = q0 + alpha * (q1 + alpha * q2)
    if Q <= 0.0:
        return q2
    dQ = q1 + 2.0 * q2 * alpha
    return q2 * (1.0 + 0.5 * L * math.sqrt(Q)) + 0.125 * L * dQ * dQ / math.sqrt(Q)


def step_search(lin, q0, q1, q2, L, alpha_max):
    """Minimiser on ``[0, alpha_max]`` of
    ``phi(t) = lin t + (q1 t + q2 t^2) / 2 + (L/6) Q(t)^{3/2}``,
    ``Q(t) = q0 + q1 t + q2 t^2``.

    Bisection on the increasing derivative; a Newton step replaces the
    midpoint whenever it lands strictly inside the current bracket.
    """
    if _phi_prime(0.0, lin, q0, q1, q2, L) >= 0.0:
        return 0.0
    # bracket by doubling so a huge alpha_max does not loosen the tolerance
    lo = 0.0
    hi = min(1.0, alpha_max)
    n = 0
    while _phi_prime(hi, lin, q0, q1, q2, L) <= 0.0:
        if hi >= alpha_max:
            return alpha_max
        lo = hi
        hi = min(2.0 * hi, alpha_max)
        n += 1
        if n > 2000:
            return hi
    width = LINE_SEARCH_RTOL * max(1.0, hi)
    a = 0.5 * (lo + hi)
    for _ in range(LINE_SEARCH_ITERS):
        fp = _phi_prime(a, lin, q0, q1, q2, L)
        if fp > 0.0:
            hi = a
        else:
            lo = a
        if hi - lo <= width or fp == 0.0:
            break
        fpp = _phi_second(a, q0, q1, q2, L)
        nxt = a - fp / fpp if fpp > 0.0 else lo - 1.0
        if lo < nxt < hi:
            if abs(nxt - a) <= 0.5 * width:
                return nxt
            a = nxt
        else:
            a = 0.5 * (lo + hi)
    return a


def _prefix_values(grad, pa, pb, pc0, pc1, vals):
    M = grad.shape[0]
    P = np.zeros(M + 1)
    Q = np.zeros(M + 1)
    for i in range(M):
        P[i + 1] = P[i] + grad[i]
        Q[i + 1] = Q[i] + (i + 1) * grad[i]
    for r in range(pa.shape[0]):
        acc = 0.0
        for p in range(2):
            a = pa[r, p]
            b = pb[r, p]
            if b >= a:
                acc += pc0[r, p] * (P[b] - P[a - 1]) + pc1[r, p] * (Q[b] - Q[a - 1])
        vals[r] = acc


def _add_vertex(out, coef, r, pa, pb, pc0, pc1):
    for p in range(2):
        for ell in range(pa[r, p], pb[r, p] + 1):
            out[ell - 1] += coef * (pc0[r, p] + pc1[r, p] * ell)


def _vertex_hv(H, r, pa, pb, pc0, pc1, out):
    M = H.shape[0]
    for i in range(M):
        out[i] = 0.0
    for p in range(2):
        for ell in range(pa[r, p], pb[r, p] + 1):
            v = pc0[r, p] + pc1[r, p] * ell
            for i in range(M):
                out[i] += H[i, ell - 1] * v


def _rebuild(lam, pa, pb, pc0, pc1, M):
    total = 0.0
    for r in range(lam.shape[0]):
        if lam[r] > 0.0:
            total += lam[r]
    z = np.zeros(M)
    for r in range(lam.shape[0]):
        if lam[r] > 0.0:
            lam[r] /= total
            _add_vertex(z, lam[r], r, pa, pb, pc0, pc1)
    return z


def _model_value(f_c, g, dz, Hdz, L):
    q = 0.0
    lin = 0.0
    for i in range(dz.shape[0]):
        q += dz[i] * Hdz[i]
        lin += g[i] * dz[i]
    if q < 0.0:
        q = 0.0
    return f_c + lin + 0.5 * q + (L / 6.0) * q ** 1.5


def afw_dense(H, g, Hw, w, f_c, L, pa, pb, pc0, pc1, lam, tol, max_iter,
              use_gap, resync_every, hv_cache, cached, history):
    """Away-step Frank-Wolfe on the cubic model with a dense Hessian.

    ``lam`` (catalog weights) is updated in place. ``history`` receives the
    model value after each iteration when it has room. Returns
    ``(iterations, model value, last Frank-Wolfe gap)``.
    """
    M = w.shape[0]
    n_cat = lam.shape[0]
    z = _rebuild(lam, pa, pb, pc0, pc1, M)
    dz = z - w
    Hdz = H @ dz
    h = _model_value(f_c, g, dz, Hdz, L)
    if history.shape[0] > 0:
        history[0] = h
    vals = np.empty(n_cat)
    grad = np.empty(M)
    d = np.empty(M)
    Hd = np.empty(M)
    tmp = np.empty(M)
    fw_gap = math.inf
    it = 0
    while it < max_iter:
        q0 = 0.0
        for i in range(M):
            q0 += dz[i] * Hdz[i]
        if q0 < 0.0:
            q0 = 0.0
        scale = 1.0 + 0.5 * L * math.sqrt(q0)
        gz = 0.0
        for i in range(M):
            grad[i] = g[i] + scale * Hdz[i]
            gz += grad[i] * z[i]
        _prefix_values(grad, pa, pb, pc0, pc1, vals)
        s = 0
        v = -1
        for r in range(n_cat):
            if vals[r] < vals[s]:
                s = r
            if lam[r] > 0.0 and (v < 0 or vals[r] > vals[v]):
                v = r
        fw_gap = gz - vals[s]
        if fw_gap <= 0.0:
            break
        if use_gap and fw_gap <= tol * max(abs(h), 1.0):
            break
        away_gap = vals[v] - gz
        is_fw = -fw_gap < -away_gap
        r = s if is_fw else v
        if cached[r]:
            for i in range(M):
                tmp[i] = hv_cache[r, i]
        else:
            _vertex_hv(H, r, pa, pb, pc0, pc1, tmp)
            if hv_cache.shape[0] == n_cat:
                for i in range(M):
                    hv_cache[r, i] = tmp[i]
                cached[r] = True
        if is_fw:
            for i in range(M):
                d[i] = -z[i]
                Hd[i] = tmp[i] - Hdz[i] - Hw[i]
            _add_vertex(d, 1.0, s, pa, pb, pc0, pc1)
            alpha_max = 1.0
        else:
            for i in range(M):
                d[i] = z[i]
                Hd[i] = Hdz[i] + Hw[i] - tmp[i]
            _add_vertex(d, -1.0, v, pa, pb, pc0, pc1)
            lam_v = lam[v]
            alpha_max = lam_v / (1.0 - lam_v) if lam_v < 1.0 else math.inf
        lin = 0.0
        q1 = 0.0
        q2 = 0.0
        for i in range(M):
            lin += g[i] * d[i]
            q1 += dz[i] * Hd[i]
            q2 += d[i] * Hd[i]
        q1 *= 2.0
        alpha = step_search(lin, q0, q1, q2, L, alpha_max)
        it += 1
        if alpha <= 0.0:
            break
        Qa = q0 + alpha * (q1 + alpha * q2)
        if Qa < 0.0:
            Qa = 0.0
        delta = alpha * lin + 0.5 * alpha * (q1 + alpha * q2) + (L / 6.0) * (Qa ** 1.5 - q0 ** 1.5)

        dropped = False
        if is_fw:
            if alpha >= 1.0:
                for k in range(n_cat):
                    lam[k] = 0.0
                lam[s] = 1.0
                dropped = True
            else:
                for k in range(n_cat):
                    lam[k] *= 1.0 - alpha
                lam[s] += alpha
        else:
            for k in range(n_cat):
                lam[k] *= 1.0 + alpha
            lam[v] -= alpha
            if alpha >= alpha_max or lam[v] <= 0.0:
                lam[v] = 0.0
                dropped = True
        for i in range(M):
            z[i] += alpha * d[i]
            dz[i] += alpha * d[i]
            Hdz[i] += alpha * Hd[i]
        h_prev = h
        h = h + delta
        if it % resync_every == 0 or dropped:
            z = _rebuild(lam, pa, pb, pc0, pc1, M)
            dz = z - w
            Hdz = H @ dz
            h = _model_value(f_c, g, dz, Hdz, L)
        if it < history.shape[0]:
            history[it] = h
        if not use_gap and not dropped and abs(h_prev - h) / max(abs(h_prev), 1.0) < tol:
            break
    return it, h, fw_gap


if njit is not None:
    _phi_prime = njit(cache=True)(_phi_prime)
    _phi_second = njit(cache=True)(_phi_second)
    step_search_compiled = njit(cache=True)(step_search)
    _prefix_values = njit(cache=True)(_prefix_values)
    _add_vertex = njit(cache=True)(_add_vertex)
    _vertex_hv = njit(cache=True)(_vertex_hv)
    _rebuild = njit(cache=True)(_rebuild)
    _model_value = njit(cache=True)(_model_value)
    step_search = step_search_compiled
    afw_dense = njit(cache=True)(afw_dense)
    HAVE_NUMBA = True
else:  # pragma: no cover
    HAVE_NUMBA = False
