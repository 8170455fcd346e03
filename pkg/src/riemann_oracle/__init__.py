"""Structured matrix nearness via Riemannian optimization of an inner
least-squares oracle, with Tikhonov-regularized penalty and
augmented-Lagrangian continuation."""

from .manifolds import Grassmann, Sphere
from .oracle import (
    ExactEvaluation,
    InnerEvaluation,
    NearnessProblem,
    PerturbationBasis,
    assemble_M,
    euclidean_gradient,
    hessian_vector,
    inner_solve_exact,
    inner_solve_regularized,
    licq_matrix,
    projection_identity_check,
)
from .outer import (
    AdaptiveEps,
    SolverConfig,
    Solution,
    TraceRecord,
    adapt_epsilon,
    auglag_solve,
    feasibility_refine,
    penalty_solve,
    solve,
)
from .trust_region import (
    Objective,
    TRConfig,
    TRReport,
    minimize,
    minimize_first_order,
    truncated_cg,
)

__version__ = "0.1.0"

__all__ = [
    "Grassmann",
    "Sphere",
    "ExactEvaluation",
    "InnerEvaluation",
    "NearnessProblem",
    "PerturbationBasis",
    "assemble_M",
    "euclidean_gradient",
    "hessian_vector",
    "inner_solve_exact",
    "inner_solve_regularized",
    "licq_matrix",
    "projection_identity_check",
    "AdaptiveEps",
    "SolverConfig",
    "Solution",
    "TraceRecord",
    "adapt_epsilon",
    "auglag_solve",
    "feasibility_refine",
    "penalty_solve",
    "solve",
    "Objective",
    "TRConfig",
    "TRReport",
    "minimize",
    "minimize_first_order",
    "truncated_cg",
    "__version__",
]
