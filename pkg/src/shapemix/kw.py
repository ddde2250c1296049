"""Certificates relating a discretised Gaussian-location fit to the continuum
nonparametric MLE.

Conventions: ``p_hat = N * f(w) = -sum_i log sum_j w_j phi(X_i - mu_j)`` is
the discretised objective in sum form and ``nu_i = 1 / sum_j w_j phi(X_i - mu_j)``
are the associated dual variables, so ``sum_i log nu_i = p_hat`` for every w.
For any positive ``nu`` with ``Gamma >= max_mu sum_i nu_i phi(X_i - mu)``,
``nu * N / Gamma`` is feasible for the continuum dual, which is what makes the
bounds below valid even at inexact primal points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import PreconditionError, UnsupportedBasisError
from .objective import POSITIVITY_FLOOR

SQRT_2PI = math.sqrt(2.0 * math.pi)
#: Lipschitz constant of the standard normal density.
PHI_LIPSCHITZ = 1.0 / math.sqrt(2.0 * math.pi * math.e)
_PHI0 = 1.0 / SQRT_2PI
_SQRT3 = math.sqrt(3.0)
_PHI2_LOCAL_MAX = 2.0 * _PHI0 * math.exp(-1.5)  # |phi''| at +-sqrt(3)

#: Largest spacing of the initial scan grid (in units of the kernel scale).
SCAN_MAX_SPACING = 0.05
GOLDEN_WIDTH = 1e-10
_CHUNK = 1 << 20


@dataclass(frozen=True)
class KWCertificate:
    nu: np.ndarray
    feasibility_margin: float
    gamma: float
    gap_bound_17: float
    gap_bound_18: float
    dual_distance_bound: float
    p_hat: float

    @property
    def lower_bound(self) -> float:
        """Certified lower bound on the continuum optimum."""
        return self.p_hat - min(self.gap_bound_17, self.gap_bound_18)


def _phi(t):
    return np.exp(-0.5 * t * t) / SQRT_2PI


def kernel_sum(nu, samples, mu) -> np.ndarray:
    """``F(mu) = sum_i nu_i phi(X_i - mu)`` at each point of ``mu``."""
    nu = np.asarray(nu, dtype=float)
    samples = np.asarray(samples, dtype=float)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.empty(mu.size)
    step = max(1, _CHUNK // max(samples.size, 1))
    for s in range(0, mu.size, step):
        m = mu[s : s + step]
        out[s : s + step] = _phi(samples[None, :] - m[:, None]) @ nu
    return out


def _check_unit_gaussian(problem):
    basis = problem.basis
    if basis.family != "gaussian":
        raise UnsupportedBasisError("certificates need the gaussian location basis")
    if basis.sigma != 1.0:
        raise UnsupportedBasisError("certificates need unit-variance kernels (sigma = 1)")


def dual_from_primal(problem, w) -> np.ndarray:
    """``nu_i = 1 / sum_j w_j phi(X_i - mu_j)``."""
    _check_unit_gaussian(problem)
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.M,):
        raise ValueError("w has the wrong length")
    inner = problem.B.T @ w
    if np.any(inner <= POSITIVITY_FLOOR):
        raise ValueError("objective is +inf at w")
    return 1.0 / inner


def dual_feasibility_margin(nu, samples, grid_atoms) -> float:
    """``max_j sum_i nu_i phi(X_i - mu_j) - N`` over the atom grid."""
    nu = np.asarray(nu, dtype=float)
    return float(kernel_sum(nu, samples, grid_atoms).max()) - nu.size


def _golden_max(fun, a, b, width):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def _envelopes(dist):
    """Upper envelopes of |phi'| and |phi''| at distances >= dist."""
    lip = np.where(dist <= 1.0, PHI_LIPSCHITZ, dist * _phi(dist))
    curv = np.abs(dist * dist - 1.0) * _phi(dist)
    curv = np.where(dist < _SQRT3, np.maximum(curv, _PHI2_LOCAL_MAX), curv)
    return lip, curv


def _cell_bounds(nu, xs, a, b, fa, fb):
    """Certified upper bounds of F on each cell [a_k, b_k]."""
    h = b - a
    out = np.empty(a.size)
    step = max(1, _CHUNK // max(xs.size, 1))
    for s in range(0, a.size, step):
        sa, sb = a[s : s + step, None], b[s : s + step, None]
        dist = np.maximum(0.0, np.maximum(sa - xs[None, :], xs[None, :] - sb))
        lip, curv = _envelopes(dist)
        hh = h[s : s + step]
        slack = np.minimum((lip @ nu) * hh / 2.0, (curv @ nu) * hh * hh / 8.0)
        out[s : s + step] = np.maximum(fa[s : s + step], fb[s : s + step]) + slack
    return out


def gamma_estimate(nu, samples, points_per_gap: int = 10, rtol: float = 1e-13,
                   max_rounds: int = 60) -> float:
    """Certified upper bound on ``max_mu sum_i nu_i phi(X_i - mu)``.

    The function is increasing left of the smallest sample and decreasing
    right of the largest, so only ``[X_min, X_max]`` is searched. A scan
    with up to ``points_per_gap`` points per inter-sample gap (fewer in gaps
    narrower than the scan spacing, so large samples stay cheap) finds local
    maxima,
    which are polished by golden-section search. Every scan cell then gets an
    upper bound from the local Lipschitz constant (``sum nu / sqrt(2 pi e)``
    at worst) and the local curvature, and cells whose bound is not within
    ``rtol`` of the best value found are bisected until they are.
    """
    nu = np.asarray(nu, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if nu.shape != samples.shape:
        raise ValueError("nu and samples must have the same length")
    order = np.argsort(samples, kind="stable")
    xs, nu = samples[order], nu[order]
    if np.any(nu <= 0):
        raise ValueError("nu must be positive")
    F = lambda m: float(kernel_sum(nu, xs, [m])[0])
    uniq = np.unique(xs)
    pieces = []
    for lo, hi in zip(uniq[:-1], uniq[1:]):
        cells = (hi - lo) / SCAN_MAX_SPACING
        n = max(1, min(points_per_gap, math.ceil(points_per_gap * cells)), math.ceil(cells))
        pieces.append(np.linspace(lo, hi, n + 1)[:-1])
    pieces.append(uniq[-1:])
    pts = np.concatenate(pieces)
    vals = kernel_sum(nu, xs, pts)
    best = float(vals.max())
    if pts.size == 1:
        return best
    for i in range(pts.size):
        left = vals[i - 1] if i > 0 else -math.inf
        right = vals[i + 1] if i + 1 < pts.size else -math.inf
        if vals[i] >= left and vals[i] >= right:
            lo = pts[max(i - 1, 0)]
            hi = pts[min(i + 1, pts.size - 1)]
            _, fv = _golden_max(F, lo, hi, GOLDEN_WIDTH)
            best = max(best, fv)

    a, b = pts[:-1], pts[1:]
    fa, fb = vals[:-1], vals[1:]
    settled = -math.inf
    lip = float(nu.sum()) * PHI_LIPSCHITZ
    for _ in range(max_rounds):
        target = best * (1.0 + rtol)
        # the global Lipschitz bound settles most cells without an O(N) pass
        ub = np.maximum(fa, fb) + lip * (b - a) / 2.0
        fine = ub > target
        if np.any(fine):
            ub[fine] = np.minimum(ub[fine], _cell_bounds(nu, xs, a[fine], b[fine], fa[fine], fb[fine]))
        done = ub <= target
        if np.any(done):
            settled = max(settled, float(ub[done].max()))
        keep = ~done
        if not np.any(keep):
            return max(settled, best)
        a, b, fa, fb = a[keep], b[keep], fa[keep], fb[keep]
        mid = 0.5 * (a + b)
        fm = kernel_sum(nu, xs, mid)
        best = max(best, float(fm.max()))
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
    ub = _cell_bounds(nu, xs, a, b, fa, fb)
    return max(settled, float(ub.max()), best)


def check_bracketing(samples, grid_atoms) -> None:
    samples = np.asarray(samples, dtype=float)
    atoms = np.asarray(grid_atoms, dtype=float)
    if not (atoms.min() <= samples.min() and samples.max() <= atoms.max()):
        raise PreconditionError(
            "the atom grid must bracket the samples "
            "(smallest atom <= min sample and max sample <= largest atom)"
        )


def gap_bounds(p_hat: float, gamma: float, N: int, delta_G: float, nu,
               samples=None, grid_atoms=None):
    """``(N log(gamma / N), N log(1 + delta_G / sqrt(8 pi e) * mean(nu)))``.

    ``p_hat`` is accepted for symmetry with the certificate but the bounds do
    not depend on it. When samples and atoms are given, bracketing is checked.
    """
    if samples is not None and grid_atoms is not None:
        check_bracketing(samples, grid_atoms)
    if gamma < N * (1.0 - 1e-12):
        raise PreconditionError(f"gamma={gamma} is below N={N}; the certificate is invalid")
    if delta_G < 0:
        raise ValueError("delta_G must be nonnegative")
    nu = np.asarray(nu, dtype=float)
    mean_nu = math.fsum(nu) / nu.size
    b17 = N * math.log(max(gamma, N) / N)
    b18 = N * math.log1p(delta_G / math.sqrt(8.0 * math.pi * math.e) * mean_nu)
    return b17, b18


def rho(t: float) -> float:
    """``t - log(1 + t)``."""
    if t < 0:
        raise ValueError("rho needs t >= 0")
    return t - math.log1p(t)


def rho_inv(x: float) -> float:
    """Inverse of :func:`rho` on ``[0, inf)`` by safeguarded bisection."""
    if x < 0:
        raise ValueError("rho_inv needs x >= 0")
    if x == 0:
        return 0.0
    hi = max(1.0, 2.0 * x + 2.0 * math.sqrt(2.0 * x))
    while rho(hi) < x:
        hi *= 2.0
    lo = 0.0
    target = 1e-12 * max(1.0, x)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if rho(mid) < x:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(hi, 1e-300):
            break
    # hi is never below the root, so prefer it unless lo is closer in value
    best = hi if abs(rho(hi) - x) <= abs(rho(lo) - x) else lo
    if abs(rho(best) - x) > target:  # pragma: no cover - defensive
        raise ArithmeticError("rho_inv failed to converge")
    return best


def dual_distance_bound(gap_bound: float) -> float:
    """Upper bound on ``(sum_i (nu*_i - nu_i)^2 / nu_i^2)^{1/2}``."""
    return rho_inv(gap_bound)


def certificate(problem, w, points_per_gap: int = 10) -> KWCertificate:
    """Build every certificate quantity for a fitted weight vector.

    A positive grid margin ``m`` means ``nu`` is slightly infeasible for the
    discretised dual; ``nu`` is then scaled by ``N / (N + m)`` and the cost of
    that scaling, ``N log(1 + m / N)``, is added to both gap bounds.
    """
    nu = dual_from_primal(problem, w)
    samples = problem.samples
    atoms = problem.basis.locations
    check_bracketing(samples, atoms)
    N = nu.size
    p_hat = -math.fsum(np.log(1.0 / nu))
    margin = dual_feasibility_margin(nu, samples, atoms)
    scale = N / (N + margin) if margin > 0 else 1.0
    extra = N * math.log1p(margin / N) if margin > 0 else 0.0
    nu_s = nu * scale
    gamma = max(gamma_estimate(nu_s, samples, points_per_gap), float(N))
    delta_G = float(np.max(np.diff(atoms))) if atoms.size > 1 else 0.0
    b17, b18 = gap_bounds(p_hat, gamma, N, delta_G, nu_s)
    b17 += extra
    b18 += extra
    return KWCertificate(
        nu=nu,
        feasibility_margin=margin,
        gamma=gamma,
        gap_bound_17=b17,
        gap_bound_18=b18,
        dual_distance_bound=dual_distance_bound(min(b17, b18)),
        p_hat=p_hat,
    )
