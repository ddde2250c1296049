"""Synthetic sample generators and their exact distribution functions.

All randomness comes from a Philox counter-based generator seeded by an
integer. Normal variates use the inverse CDF of open-interval uniforms and
Beta variates use the ratio of two Gamma variates, so a fixed seed gives the
same samples on every platform with the same NumPy bit generator.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betainc, ndtr, ndtri

GAUSS5_WEIGHTS = np.array([0.6, 0.05, 0.15, 0.1, 0.1])
GAUSS5_MEANS = np.array([0.0, 4.0, 5.5, -3.5, -4.5])
GAUSS5_SDS = np.array([1.0, 0.5, 1.0, 0.25, 0.25])

# Bernstein degree-5 mixtures: component m is Beta(m, 6 - m)
BETA_CONCAVE_WEIGHTS = np.array([0.05, 0.3, 0.3, 0.3, 0.05])
BETA_CONVEX_INCREASING_WEIGHTS = np.array([0.05, 0.05, 0.1, 0.25, 0.55])
BETA_DEGREE = 5

#: Half-normal draws at or above this are discarded; survivors are divided by it.
HALFNORMAL_CUTOFF = 3.0

PROFILES = ("gauss5", "beta_concave", "beta_convex_increasing", "halfnormal")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _open_uniform(rng, n):
    # multiples of 2^-53 shifted by half a step: strictly inside (0, 1)
    return rng.random(n) + 2.0 ** -54


def _normal(rng, n):
    return ndtri(_open_uniform(rng, n))


def _components(rng, weights, n):
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(n), side="right")


def _beta_mixture(rng, weights, n):
    comp = _components(rng, weights, n)
    m = comp + 1.0
    x = rng.standard_gamma(m)
    y = rng.standard_gamma(BETA_DEGREE - m + 1.0)
    return x / (x + y)


def sample(profile: str, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` samples from a named profile."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    rng = make_rng(seed)
    if profile == "gauss5":
        comp = _components(rng, GAUSS5_WEIGHTS, n)
        return GAUSS5_MEANS[comp] + GAUSS5_SDS[comp] * _normal(rng, n)
    if profile == "beta_concave":
        return _beta_mixture(rng, BETA_CONCAVE_WEIGHTS, n)
    if profile == "beta_convex_increasing":
        return _beta_mixture(rng, BETA_CONVEX_INCREASING_WEIGHTS, n)
    out = np.empty(0)
    while out.size < n:
        z = np.abs(_normal(rng, max(n - out.size, 16) * 2))
        out = np.concatenate([out, z[z < HALFNORMAL_CUTOFF]])
    return out[:n] / HALFNORMAL_CUTOFF


def cdf(profile: str, x) -> np.ndarray:
    """Exact distribution function of a profile."""
    x = np.asarray(x, dtype=float)
    if profile == "gauss5":
        z = (x[..., None] - GAUSS5_MEANS) / GAUSS5_SDS
        return ndtr(z) @ GAUSS5_WEIGHTS
    if profile in ("beta_concave", "beta_convex_increasing"):
        w = BETA_CONCAVE_WEIGHTS if profile == "beta_concave" else BETA_CONVEX_INCREASING_WEIGHTS
        m = np.arange(1, BETA_DEGREE + 1, dtype=float)
        xc = np.clip(x, 0.0, 1.0)[..., None]
        return betainc(m, BETA_DEGREE - m + 1.0, xc) @ w
    if profile == "halfnormal":
        xc = np.clip(x, 0.0, 1.0)
        return (2.0 * ndtr(HALFNORMAL_CUTOFF * xc) - 1.0) / (2.0 * ndtr(HALFNORMAL_CUTOFF) - 1.0)
    raise ValueError(f"unknown profile {profile!r}")


def mean(profile: str) -> float:
    """Exact mean of a profile."""
    if profile == "gauss5":
        return float(GAUSS5_WEIGHTS @ GAUSS5_MEANS)
    if profile in ("beta_concave", "beta_convex_increasing"):
        w = BETA_CONCAVE_WEIGHTS if profile == "beta_concave" else BETA_CONVEX_INCREASING_WEIGHTS
        m = np.arange(1, BETA_DEGREE + 1)
        return float(w @ m) / (BETA_DEGREE + 1)
    if profile == "halfnormal":
        c = HALFNORMAL_CUTOFF
        mass = 2.0 * ndtr(c) - 1.0
        # E|Z| on [0, c] is 2 (phi(0) - phi(c)) / mass
        phi0 = 1.0 / np.sqrt(2.0 * np.pi)
        return float(2.0 * (phi0 - phi0 * np.exp(-0.5 * c * c)) / mass) / c
    raise ValueError(f"unknown profile {profile!r}")
