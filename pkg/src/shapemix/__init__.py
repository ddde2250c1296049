"""Maximum-likelihood mixture proportions under shape constraints."""

from .basis import (
    BasisSpec,
    MixtureProblem,
    bernstein_matrix,
    density_eval,
    gaussian_location_matrix,
    uniform_location_grid,
)
from .cubic_newton import SolverConfig, SolveTrace, fit_unimodal, minimize
from .exceptions import (
    DegenerateRangeError,
    DomainError,
    InfeasiblePointError,
    ParseError,
    PreconditionError,
    ShapemixError,
    UnsupportedBasisError,
)
from .kw import KWCertificate, certificate
from .polytope import ShapeConstraint, enumerate_vertices, lp_oracle, membership
from .reference import em_solve

__all__ = [
    "BasisSpec", "MixtureProblem", "bernstein_matrix", "density_eval",
    "gaussian_location_matrix", "uniform_location_grid",
    "SolverConfig", "SolveTrace", "fit_unimodal", "minimize",
    "DegenerateRangeError", "DomainError", "InfeasiblePointError", "ParseError",
    "PreconditionError", "ShapemixError", "UnsupportedBasisError",
    "KWCertificate", "certificate",
    "ShapeConstraint", "enumerate_vertices", "lp_oracle", "membership",
    "em_solve",
]
