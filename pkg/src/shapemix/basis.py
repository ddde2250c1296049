"""Basis families and the evaluation matrix of a mixture problem.

Two families are supported: Bernstein polynomials on [0, 1] (equivalently
Beta(m, M - m + 1) densities) and Gaussian location kernels on a fixed grid
of centres with a common scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import DegenerateRangeError, DomainError

#: Columns whose largest entry falls below this are rejected.
COLUMN_FLOOR = 1e-300
#: Default number of grid points for density evaluation.
DEFAULT_GRID_SIZE = 1001

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class BasisSpec:
    """Description of a basis family.

    Parameters
    ----------
    family : {"bernstein", "gaussian"}
    M : int
        Number of basis elements.
    locations : ndarray, optional
        Strictly increasing centres (gaussian only).
    sigma : float, optional
        Common kernel scale (gaussian only).
    """

    family: str
    M: int
    locations: Optional[np.ndarray] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.family == "bernstein":
            if int(self.M) < 1:
                raise ValueError("bernstein basis needs M >= 1")
        elif self.family == "gaussian":
            locs = np.asarray(self.locations, dtype=float)
            if locs.ndim != 1 or locs.size != self.M:
                raise ValueError("locations must be a vector of length M")
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("sigma must be positive")
            if np.any(np.diff(locs) <= 0):
                raise ValueError("locations must be strictly increasing")
            locs = locs.copy()
            locs.flags.writeable = False
            object.__setattr__(self, "locations", locs)
            object.__setattr__(self, "sigma", float(self.sigma))
        else:
            raise ValueError(f"unknown basis family {self.family!r}")

    @classmethod
    def bernstein(cls, M: int) -> "BasisSpec":
        return cls("bernstein", int(M))

    @classmethod
    def gaussian(cls, locations, sigma: float) -> "BasisSpec":
        locs = np.asarray(locations, dtype=float)
        return cls("gaussian", locs.size, locs, sigma)

    def evaluate(self, x) -> np.ndarray:
        """Return the M x len(x) matrix of basis values at ``x``."""
        x = np.asarray(x, dtype=float)
        if self.family == "bernstein":
            return _bernstein_values(x, self.M)
        return _gaussian_values(x, self.locations, self.sigma)

    def support(self):
        """Default plotting interval for the family."""
        if self.family == "bernstein":
            return 0.0, 1.0
        return float(self.locations[0]), float(self.locations[-1])


@dataclass(frozen=True)
class MixtureProblem:
    """Immutable problem instance: evaluation matrix plus metadata.

    ``B[i, j]`` is basis element ``i`` evaluated at sample ``j``.
    """

    B: np.ndarray
    samples: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        B = np.ascontiguousarray(self.B, dtype=float)
        samples = np.asarray(self.samples, dtype=float).copy()
        if B.ndim != 2 or B.shape[1] != samples.size:
            raise ValueError("B must be M x N with N = len(samples)")
        if B.shape[0] != self.basis.M:
            raise ValueError("B has the wrong number of rows for the basis")
        if not np.all(np.isfinite(B)) or np.any(B < 0):
            raise ValueError("B entries must be finite and nonnegative")
        if B.shape[1] == 0:
            raise ValueError("at least one sample is required")
        dead = np.flatnonzero(B.max(axis=0) < COLUMN_FLOOR)
        if dead.size:
            raise DomainError(
                f"{dead.size} sample(s) have negligible density under every "
                f"basis element (first at index {dead[0]}); "
                "the log-likelihood is -inf for every weight vector"
            )
        B.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "samples", samples)

    @property
    def M(self) -> int:
        return self.B.shape[0]

    @property
    def N(self) -> int:
        return self.B.shape[1]


def _bernstein_values(x, M):
    if np.any((x < 0) | (x > 1)) or np.any(~np.isfinite(x)):
        raise DomainError("bernstein samples must lie in [0, 1]")
    m = np.arange(1, M + 1, dtype=float)[:, None]
    log_coef = gammaln(M + 1.0) - gammaln(m) - gammaln(M - m + 1.0)
    # xlogy(0, 0) = 0 gives the 0**0 = 1 convention at the endpoints
    logv = log_coef + xlogy(m - 1.0, x[None, :]) + xlogy(M - m, 1.0 - x[None, :])
    return np.exp(logv)


def _gaussian_values(x, locations, sigma):
    z = (x[None, :] - np.asarray(locations)[:, None]) / sigma
    return np.exp(-0.5 * z * z) * _INV_SQRT_2PI


def bernstein_matrix(samples, M: int) -> MixtureProblem:
    """Build the problem for the degree-M Bernstein (Beta mixture) basis.

    Entries are computed in the log domain, so they stay finite for M in
    the thousands.
    """
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    samples = np.asarray(samples, dtype=float).ravel()
    spec = BasisSpec.bernstein(int(M))
    return MixtureProblem(spec.evaluate(samples), samples, spec)


def gaussian_location_matrix(samples, locations, sigma: float) -> MixtureProblem:
    """Build the problem for Gaussian kernels ``phi((x - mu_i) / sigma)``."""
    samples = np.asarray(samples, dtype=float).ravel()
    spec = BasisSpec.gaussian(locations, sigma)
    return MixtureProblem(spec.evaluate(samples), samples, spec)


def uniform_location_grid(samples, M: int) -> np.ndarray:
    """M equispaced points from min(samples) to max(samples) inclusive."""
    if int(M) != M or M < 2:
        raise ValueError("M must be an integer >= 2")
    samples = np.asarray(samples, dtype=float)
    lo, hi = samples.min(), samples.max()
    if not hi > lo:
        raise DegenerateRangeError("samples span an empty range")
    return np.linspace(lo, hi, int(M))


def density_eval(basis: BasisSpec, w, grid=None) -> np.ndarray:
    """Evaluate ``sum_i w_i psi_i(x)`` on ``grid``.

    When ``grid`` is None a grid of 1001 equispaced points over the basis
    support (the centre range for gaussian kernels) is used.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (basis.M,):
        raise ValueError("weight vector has the wrong length")
    if grid is None:
        lo, hi = basis.support()
        grid = np.linspace(lo, hi, DEFAULT_GRID_SIZE)
    values = w @ basis.evaluate(np.asarray(grid, dtype=float).ravel())
    return np.maximum(values, 0.0)
