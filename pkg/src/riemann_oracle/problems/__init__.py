"""Reductions of concrete nearness problems to the inner-oracle framework."""

from .gcd import GcdProblem, GcdSolution, gcd_solve, sylvester_build
from .instability import (
    InstabilityOracle,
    Region,
    instability_solve,
    region_project,
)
from .nullity import nullity_problem, nullity_solve
from .polynomial import (
    MatrixPolynomial,
    UnstructuredPolynomialOracle,
    polynomial_distance,
    polynomial_problem,
    toeplitz_lift,
)
from .sparse import SparseNearness, SparsePattern, pattern_basis, sparse_problem
from .structures import full_basis, toeplitz_basis

__all__ = [
    "GcdProblem",
    "GcdSolution",
    "gcd_solve",
    "sylvester_build",
    "InstabilityOracle",
    "Region",
    "instability_solve",
    "region_project",
    "nullity_problem",
    "nullity_solve",
    "MatrixPolynomial",
    "UnstructuredPolynomialOracle",
    "polynomial_distance",
    "polynomial_problem",
    "toeplitz_lift",
    "SparseNearness",
    "SparsePattern",
    "pattern_basis",
    "sparse_problem",
    "full_basis",
    "toeplitz_basis",
]
