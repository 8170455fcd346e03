"""Nearest matrix with nullity at least ell, over a structured perturbation set.

The kernel certificate becomes an orthonormal block V (n x ell), unique only
up to a unitary change of basis, so the search space is the Grassmannian.
The inner oracle is unchanged: M and r are simply row-stacked over the
columns of V, which :mod:`riemann_oracle.oracle` already handles for 2-D
kernel arguments.
"""

from __future__ import annotations

import numpy as np

from ..manifolds import Grassmann
from ..oracle import NearnessProblem, PerturbationBasis
from ..outer import SolverConfig, Solution, solve


def nullity_problem(
    A: np.ndarray, basis: PerturbationBasis, ell: int
) -> tuple[NearnessProblem, Grassmann]:
    """Problem instance plus the Grassmannian it is minimized over."""
    problem = NearnessProblem(A, basis)
    if not 1 <= ell <= problem.n:
        raise ValueError(f"need 1 <= ell <= {problem.n}, got ell={ell}")
    return problem, Grassmann(problem.n, ell, problem.field)


def nullity_solve(A: np.ndarray, basis: PerturbationBasis, ell: int, cfg: SolverConfig) -> Solution:
    """Distance to the matrices of rank at most n - ell within the structure.

    Attaches a warning when the reported A + Delta does not have at least
    ell singular values below 1e-8 ||A||_F.
    """
    problem, manifold = nullity_problem(A, basis, ell)
    sol = solve(problem, manifold, cfg)
    s = np.linalg.svd(np.asarray(A) + sol.Delta, compute_uv=False)
    tol = 1e-8 * np.linalg.norm(np.asarray(A))
    if int(np.sum(s <= tol)) < ell:
        sol.warnings.append(
            f"nullity certificate failed: only {int(np.sum(s <= tol))} of {ell} "
            f"singular values fall below {tol:.2e}"
        )
    return sol
