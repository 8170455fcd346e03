"""Inner least-squares oracle for structured matrix nearness problems.

Given a target matrix A and an orthonormal basis P^(1..p) of admissible
perturbations, the oracle answers, for a candidate kernel vector v (or a
kernel block V), the question "what is the smallest ||Delta||_F with
(A + Delta) v = 0 and Delta in span{P^(i)}?" -- either exactly (via the
pseudoinverse of M(v) = [P^(1)v ... P^(p)v]) or in the Tikhonov-regularized
form

    f_eps(v) = r^* (M M^* + eps I)^{-1} r,      r = -A v - eps y,

where y is an optional multiplier shift.  It also supplies the Euclidean
gradient -2 (A + Delta_*)^* z and the exact Hessian-vector product of
f_eps, which the Riemannian trust-region solver consumes.

Everything here is dtype-generic over real and complex entries, and accepts
both a single kernel vector (shape (n,)) and a kernel block (shape (n, l)),
in which case M and r are the row-stacked versions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

RANK_TOL = 1e-12  # relative singular-value cutoff for pseudoinverses
FEAS_TOL = 1e-8  # relative residual below which r is declared in Im M
ORTHO_TOL = 1e-12  # allowed deviation of P^*P from the identity


def _vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).reshape(-1, order="F")


def _as_block(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim == 1:
        return v[:, None]
    if v.ndim == 2:
        return v
    raise ValueError(f"kernel argument must be 1-D or 2-D, got shape {v.shape}")


class PerturbationBasis:
    """Orthonormal basis {P^(i)} of an admissible perturbation space.

    The stacked vectorization P (mn x p, one column per vec P^(i)) must have
    orthonormal columns, so that ||Delta||_F equals the coordinate norm
    ||delta||.  Use :meth:`orthonormalized` to build a basis from arbitrary
    spanning matrices via a thin QR factorization.
    """

    def __init__(self, matrices: np.ndarray):
        mats = np.asarray(matrices)
        if mats.ndim != 3:
            raise ValueError("expected a (p, m, n) array of basis matrices")
        self.matrices = mats
        self.p, self.m, self.n = mats.shape
        self.stacked = self._stack(mats)
        gram = self.stacked.conj().T @ self.stacked
        defect = np.max(np.abs(gram - np.eye(self.p)))
        if defect > ORTHO_TOL:
            raise ValueError(
                f"basis vectorizations are not orthonormal (defect {defect:.2e}); "
                "use PerturbationBasis.orthonormalized to re-orthonormalize"
            )

    @staticmethod
    def _stack(mats: np.ndarray) -> np.ndarray:
        # (p, m, n) -> (mn, p), column i = vec(P^(i)) in column-major order
        p, m, n = mats.shape
        return mats.transpose(2, 1, 0).reshape(m * n, p)

    @classmethod
    def orthonormalized(cls, matrices: np.ndarray) -> tuple["PerturbationBasis", bool]:
        """Basis from spanning matrices, re-orthonormalized by thin QR.

        Returns the basis and a flag telling whether re-orthonormalization
        changed the representation.  A rank-deficient input is rejected with
        the index of the first dependent block.
        """
        mats = np.asarray(matrices)
        if mats.ndim != 3:
            raise ValueError("expected a (p, m, n) array of basis matrices")
        p, m, n = mats.shape
        stacked = cls._stack(mats)
        gram = stacked.conj().T @ stacked
        if np.max(np.abs(gram - np.eye(p))) <= ORTHO_TOL:
            return cls(mats), False
        q, r = np.linalg.qr(stacked)
        diag = np.abs(np.diagonal(r))
        scale = diag.max() if diag.size else 0.0
        bad = np.nonzero(diag <= RANK_TOL * max(scale, 1.0))[0]
        if bad.size:
            raise ValueError(f"basis is rank deficient: block {int(bad[0])} is dependent")
        new = np.stack([q[:, i].reshape(m, n, order="F") for i in range(p)])
        return cls(new), True

    def combine(self, delta: np.ndarray) -> np.ndarray:
        """Sum_i P^(i) delta_i as an m x n matrix."""
        delta = np.asarray(delta)
        if delta.shape != (self.p,):
            raise ValueError(f"expected {self.p} coordinates, got shape {delta.shape}")
        return (self.stacked @ delta).reshape(self.m, self.n, order="F")

    def coordinates(self, mat: np.ndarray) -> np.ndarray:
        """Orthogonal coordinates <P^(i), mat> of an m x n matrix."""
        return self.stacked.conj().T @ _vec(mat)


def assemble_M(basis: PerturbationBasis, v: np.ndarray) -> np.ndarray:
    """Matrix M(v) with column i = P^(i) v; rows are stacked over kernel columns."""
    V = _as_block(v)
    if V.shape[0] != basis.n:
        raise ValueError(f"kernel vector has length {V.shape[0]}, basis expects {basis.n}")
    # (p, m, l) -> (m*l, p) with column i = vec(P^(i) V)
    cols = np.einsum("pmn,nl->pml", basis.matrices, V)
    p, m, ell = cols.shape
    return cols.transpose(2, 1, 0).reshape(m * ell, p)


@dataclass
class ExactEvaluation:
    """Outcome of the exact inner solve at one kernel candidate."""

    feasible: bool
    g_value: float  # least-squares value ||M^+ r||^2, finite even if infeasible
    delta_star: np.ndarray
    Delta_star: np.ndarray
    residual: float  # ||M M^+ r - r||
    sigma_min: float

    @property
    def value(self) -> float:
        return self.g_value if self.feasible else np.inf


@dataclass
class InnerEvaluation:
    """One regularized oracle evaluation, with the factorization kept for reuse."""

    M: np.ndarray
    r: np.ndarray
    z: np.ndarray
    delta_star: np.ndarray
    Delta_star: np.ndarray
    value: float
    eps: float
    # SVD of M, reused for every Hessian-vector product at the same point
    _U: np.ndarray = field(repr=False, default=None)
    _s: np.ndarray = field(repr=False, default=None)
    _Vh: np.ndarray = field(repr=False, default=None)
    sigma_min_override: Optional[float] = field(repr=False, default=None)

    @property
    def sigma_min(self) -> float:
        if self.sigma_min_override is not None:
            return self.sigma_min_override
        return float(self._s.min()) if self._s is not None and self._s.size else 0.0

    def solve_gram(self, t: np.ndarray) -> np.ndarray:
        """Apply (M M^* + eps I)^{-1} to a stacked vector t."""
        u, s = self._U, self._s
        c = u.conj().T @ t
        out = u @ (c / (s**2 + self.eps))
        if u.shape[0] > u.shape[1]:
            out = out + (t - u @ c) / self.eps
        return out


class NearnessProblem:
    """Structured singular-matrix nearness instance min ||Delta||_F s.t. (A+Delta)v = 0.

    Also serves as the generic inner oracle consumed by the outer solvers;
    specialized problem classes implement the same interface with fast paths.
    """

    has_hessian = True
    distance_scale = 1.0

    def __init__(self, A: np.ndarray, basis: PerturbationBasis):
        A = np.asarray(A)
        if A.shape != (basis.m, basis.n):
            raise ValueError(
                f"A has shape {A.shape}, basis matrices have shape {(basis.m, basis.n)}"
            )
        self.A = A
        self.basis = basis
        self.m, self.n = A.shape
        alpha = basis.coordinates(A)
        in_span = np.linalg.norm(A - basis.combine(alpha)) <= 1e-12 * max(
            np.linalg.norm(A), 1e-300
        )
        self.alpha: Optional[np.ndarray] = alpha if in_span else None

    # -- identity and geometry hooks -------------------------------------
    @property
    def field(self) -> str:
        complex_data = np.iscomplexobj(self.A) or np.iscomplexobj(self.basis.matrices)
        return "complex" if complex_data else "real"

    @property
    def contains_A(self) -> bool:
        return self.alpha is not None

    @property
    def ambient_n(self) -> int:
        return self.n

    def spectral_start(self, ell: int = 1) -> np.ndarray:
        """Right singular vectors of A for the smallest singular values."""
        _, _, vh = np.linalg.svd(self.A)
        block = vh[-ell:].conj().T
        return block[:, 0] if ell == 1 else block

    # -- oracle interface -------------------------------------------------
    def evaluate(self, v, eps: float, y=None) -> InnerEvaluation:
        return inner_solve_regularized(self, v, eps, y)

    def gradient(self, v, eps: float, y, ev: InnerEvaluation):
        return euclidean_gradient(self, v, eps, y, ev)

    def hessian_vec(self, v, eps: float, y, ev: InnerEvaluation, w):
        return hessian_vector(self, v, eps, y, ev, w)

    def exact_solution(self, v, ev: InnerEvaluation | None = None) -> ExactEvaluation:
        return inner_solve_exact(self, v)

    def constraint(self, v, ev: InnerEvaluation) -> np.ndarray:
        """(A + Delta_*) v for the regularized minimizer, in stacked form."""
        V = _as_block(v)
        return _vec((self.A + ev.Delta_star) @ V)

    def refine_feasibility(self, v, ev: InnerEvaluation):
        """Feasibility refinement for square nonsingular A; None if not applicable."""
        if self.m != self.n:
            return None
        try:
            return feasibility_refine_point(self.A, v, ev)
        except np.linalg.LinAlgError:
            return None

    def delta_norm(self, delta: np.ndarray) -> float:
        return float(np.linalg.norm(delta))


def exact_least_squares(basis: PerturbationBasis, M: np.ndarray, r: np.ndarray) -> ExactEvaluation:
    """Pseudoinverse solve delta = M^+ r with a feasibility verdict on r in Im M."""
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    smax = s[0] if s.size else 0.0
    mask = s > RANK_TOL * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    c = u.conj().T @ r
    inv_s = np.where(mask, np.divide(1.0, s, out=np.ones_like(s), where=mask), 0.0)
    delta = vh.conj().T @ (c * inv_s)
    rnorm = np.linalg.norm(r)
    residual = np.sqrt(
        float(np.linalg.norm(c[~mask]) ** 2 + max(rnorm**2 - np.linalg.norm(c) ** 2, 0.0))
    )
    feasible = residual <= FEAS_TOL * rnorm if rnorm > 0 else True
    Delta = basis.combine(delta)
    g_value = float(np.linalg.norm(delta) ** 2)
    return ExactEvaluation(feasible, g_value, delta, Delta, residual, float(s.min()) if s.size else 0.0)


def inner_solve_exact(problem: NearnessProblem, v: np.ndarray) -> ExactEvaluation:
    """Minimal-norm Delta with (A + Delta)v = 0, or an infeasibility verdict.

    delta_* = M^+ r with r = -Av, the pseudoinverse taken with singular
    values below RANK_TOL * sigma_max treated as zero.  Infeasibility
    (r not in Im M, relative residual above FEAS_TOL) is a return state,
    not an error; the least-squares value g(v) is reported either way.
    """
    V = _as_block(v)
    if not np.any(V):
        raise ValueError("kernel candidate must be nonzero")
    M = assemble_M(problem.basis, V)
    r = -_vec(problem.A @ V)
    return exact_least_squares(problem.basis, M, r)


def inner_solve_regularized(
    problem: NearnessProblem, v: np.ndarray, eps: float, y=None
) -> InnerEvaluation:
    """Tikhonov-regularized inner solve at penalty eps and multiplier shift y.

    Factors M once by SVD and reuses it for the value, the gradient and every
    Hessian-vector product at the same point; the two equivalent Gram systems
    (through M M^* or M^* M) coincide in this factored form.
    """
    if eps <= 0:
        raise ValueError(f"regularization parameter must be positive, got {eps}")
    V = _as_block(v)
    M = assemble_M(problem.basis, V)
    r = -_vec(problem.A @ V)
    if y is not None:
        r = r - eps * _vec(y)
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    c = u.conj().T @ r
    w = c / (s**2 + eps)
    z = u @ w
    if u.shape[0] > u.shape[1]:
        z = z + (r - u @ c) / eps
    value = float(np.real(np.vdot(r, z)))
    delta = vh.conj().T @ (s * w)
    Delta = problem.basis.combine(delta)
    return InnerEvaluation(M, r, z, delta, Delta, value, eps, u, s, vh)


def euclidean_gradient(problem, v, eps, y, ev: InnerEvaluation):
    """Euclidean gradient -2 (A + Delta_*)^* z of the regularized value."""
    V = _as_block(v)
    Z = ev.z.reshape(problem.m, V.shape[1], order="F")
    G = -2.0 * (problem.A + ev.Delta_star).conj().T @ Z
    return G[:, 0] if np.asarray(v).ndim == 1 else G


def hessian_vector(problem, v, eps, y, ev: InnerEvaluation, w):
    """Euclidean Hessian of f_eps applied to an ambient direction w.

    Uses the chain rule around the factored Gram solve:
        zdot   = -(MM^* + eps I)^{-1} (M Mdot^* z + (A + Delta_*) w),
        ddot   = Mdot^* z + M^* zdot,
        H w    = -2 Deltadot^* z - 2 (A + Delta_*)^* zdot,
    and is real-linear (not complex-linear) in w.
    """
    V = _as_block(v)
    W = _as_block(w)
    if W.shape != V.shape:
        raise ValueError(f"direction shape {W.shape} does not match point shape {V.shape}")
    B = problem.A + ev.Delta_star
    Mdot = assemble_M(problem.basis, W)
    t = ev.M @ (Mdot.conj().T @ ev.z) + _vec(B @ W)
    zdot = -ev.solve_gram(t)
    ddot = Mdot.conj().T @ ev.z + ev.M.conj().T @ zdot
    Delta_dot = problem.basis.combine(ddot)
    Z = ev.z.reshape(problem.m, V.shape[1], order="F")
    Zdot = zdot.reshape(problem.m, V.shape[1], order="F")
    H = -2.0 * Delta_dot.conj().T @ Z - 2.0 * B.conj().T @ Zdot
    return H[:, 0] if np.asarray(w).ndim == 1 else H


def projection_identity_check(problem: NearnessProblem, v, tol: float = 1e-10) -> bool:
    """When A lies in the perturbation span, the exact solve is a projection.

    Verifies delta_* = -M^+ M alpha and alpha + delta_* = (I - M^+ M) alpha
    against the exact inner solve.
    """
    if not problem.contains_A:
        raise ValueError("problem does not carry structure coordinates for A")
    ex = inner_solve_exact(problem, v)
    M = assemble_M(problem.basis, v)
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    smax = s[0] if s.size else 0.0
    mask = s > RANK_TOL * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    # M^+ M = V diag(mask) V^*
    proj = (vh.conj().T * mask) @ vh
    alpha = problem.alpha
    scale = max(1.0, float(np.linalg.norm(alpha)))
    ok1 = np.linalg.norm(ex.delta_star + proj @ alpha) <= tol * scale
    ok2 = np.linalg.norm((alpha + ex.delta_star) - (alpha - proj @ alpha)) <= tol * scale
    return bool(ok1 and ok2)


def licq_matrix(problem: NearnessProblem, v: np.ndarray, ev: InnerEvaluation) -> np.ndarray:
    """Stacked constraint Jacobian [M^*; (I - v v^*)(A + Delta_*)^*].

    Full column rank (checked by the caller through sigma_min) certifies the
    constraint qualification at a candidate stationary point; diagnostic only.
    """
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("constraint-qualification diagnostic expects a kernel vector")
    proj = np.eye(problem.n, dtype=ev.Delta_star.dtype) - np.outer(v, v.conj())
    top = ev.M.conj().T
    bottom = proj @ (problem.A + ev.Delta_star).conj().T
    return np.vstack([top, bottom])


def feasibility_refine_point(A: np.ndarray, v, ev: InnerEvaluation):
    """Move v onto the numerically feasible set near a converged minimizer.

    Components of r aligned with directions where the Gram matrix M M^* is
    numerically zero (d_i <= 1e-16) are zeroed, mapped back through A^{-1},
    and the result is renormalized.  Requires square nonsingular A.
    """
    u, s = ev._U, ev._s
    r = ev.r + 0.0
    c = u.conj().T @ r
    keep = (s**2) > 1e-16
    r_reg = u @ (c * keep)  # also drops the component outside Im M
    V = _as_block(v)
    R = r_reg.reshape(A.shape[0], V.shape[1], order="F")
    V_reg = -np.linalg.solve(A, R)
    if np.asarray(v).ndim == 1:
        out = V_reg[:, 0]
        nrm = np.linalg.norm(out)
        if nrm == 0:
            return None
        return out / nrm
    q, rr = np.linalg.qr(V_reg)
    d = np.diagonal(rr)
    if np.min(np.abs(d)) == 0:
        return None
    return q * (d / np.abs(d)).conj()
