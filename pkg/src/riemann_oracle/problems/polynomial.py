"""Nearest singular matrix polynomial of bounded grade.

A square matrix polynomial A(x) = sum A_i x^i is singular iff some nonzero
vector polynomial v(x) of degree d <= k(n-1) annihilates it; restricting to
d = floor(k(n-1)/2) and searching both the right kernel of A(x) and the
right kernel of A(x)^T covers all cases while halving the lifted sizes.
The lifted problem "make the block-Toeplitz matrix T_d(A) singular with a
block-Toeplitz perturbation" is exactly the structured nearness problem of
the core oracle; for unstructured coefficient perturbations the Kronecker
form M(v) = T_k(v^T) (x) I_n collapses every solve onto the small Gram
matrix T_k(v^T) T_k(v^T)^* + eps I, so the wide M is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..manifolds import Sphere
from ..oracle import (
    FEAS_TOL,
    RANK_TOL,
    ExactEvaluation,
    InnerEvaluation,
    NearnessProblem,
    PerturbationBasis,
)
from ..outer import SolverConfig, Solution, solve


@dataclass(frozen=True)
class MatrixPolynomial:
    """Matrix polynomial sum_i coeffs[i] x^i with square coefficients."""

    coeffs: np.ndarray  # (k+1, n, n)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("expected coefficients of shape (k+1, n, n)")
        object.__setattr__(self, "coeffs", c)

    @property
    def grade(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]

    @property
    def norm(self) -> float:
        """Frobenius norm of the stacked coefficients [A_0 ... A_k]."""
        return float(np.linalg.norm(self.coeffs))

    def transposed(self) -> "MatrixPolynomial":
        return MatrixPolynomial(self.coeffs.transpose(0, 2, 1).copy())

    def __call__(self, x: complex) -> np.ndarray:
        out = np.zeros_like(self.coeffs[0], dtype=np.result_type(self.coeffs, x))
        for i, c in enumerate(self.coeffs):
            out = out + c * x**i
        return out


def toeplitz_lift(poly: MatrixPolynomial, d: int) -> np.ndarray:
    """Block-Toeplitz lift T_d(A) with vec(A(x) v(x)) = T_d(A) vec(v).

    Block column j carries A_0..A_k shifted down j block rows; the result has
    n(k+d+1) rows and n(d+1) columns, and ||T_d(Delta)||_F =
    sqrt(d+1) ||Delta(x)||_F.
    """
    if d < 0:
        raise ValueError("kernel degree d must be >= 0")
    k, n = poly.grade, poly.size
    out = np.zeros(((k + d + 1) * n, (d + 1) * n), dtype=poly.coeffs.dtype)
    for j in range(d + 1):
        for i in range(k + 1):
            out[(i + j) * n : (i + j + 1) * n, j * n : (j + 1) * n] = poly.coeffs[i]
    return out


def pattern_structure(poly: MatrixPolynomial) -> np.ndarray:
    """Unit basis polynomials for every nonzero coefficient entry of ``poly``."""
    idx = np.argwhere(poly.coeffs != 0)
    if idx.size == 0:
        raise ValueError("polynomial has no nonzero coefficients")
    basis = np.zeros((len(idx), *poly.coeffs.shape), dtype=poly.coeffs.dtype)
    for b, (i, a, c) in enumerate(idx):
        basis[b, i, a, c] = 1.0
    return basis


class LiftedPolynomialProblem(NearnessProblem):
    """Structured polynomial nearness through the block-Toeplitz lift.

    Reported distances divide the lifted coordinate norm by sqrt(d+1) so they
    measure ||Delta(x)||_F directly.
    """

    def __init__(self, poly: MatrixPolynomial, structure: np.ndarray, d: int):
        structure = np.asarray(structure)
        if structure.ndim != 4 or structure.shape[1:] != poly.coeffs.shape:
            raise ValueError("structure must be (p, k+1, n, n) matching the polynomial")
        p = structure.shape[0]
        k, n = poly.grade, poly.size
        # orthonormalize in coefficient space, then lift (the lift preserves
        # orthogonality and scales every norm by sqrt(d+1))
        flat = structure.reshape(p, (k + 1) * n, n).transpose(0, 2, 1)
        coeff_basis, _ = PerturbationBasis.orthonormalized(flat)
        polys = coeff_basis.matrices.transpose(0, 2, 1).reshape(p, k + 1, n, n)
        lifted = np.stack(
            [toeplitz_lift(MatrixPolynomial(polys[i]), d) for i in range(p)]
        ) / np.sqrt(d + 1)
        super().__init__(toeplitz_lift(poly, d), PerturbationBasis(lifted))
        self.poly = poly
        self.structure_polys = polys
        self.d = d
        self.distance_scale = 1.0 / np.sqrt(d + 1)

    def delta_polynomial(self, delta: np.ndarray) -> MatrixPolynomial:
        """Map structure coordinates back to the perturbation polynomial."""
        coeffs = np.einsum("p,pinm->inm", delta, self.structure_polys) * self.distance_scale
        return MatrixPolynomial(coeffs)

    def refine_feasibility(self, v, ev):
        return None  # the lifted matrix is never square


def _row_toeplitz(V: np.ndarray, k: int) -> np.ndarray:
    """T_k(v^T) for the vector polynomial with coefficient columns V (n x (d+1))."""
    n, dp1 = V.shape
    out = np.zeros((k + dp1, n * (k + 1)), dtype=V.dtype)
    for j in range(k + 1):
        out[j : j + dp1, j * n : (j + 1) * n] = V.T
    return out


def _poly_apply(B: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Coefficient columns of B(x) v(x): out[:, i] = sum_{j+l=i} B_j V[:, l]."""
    k = B.shape[0] - 1
    n, dp1 = V.shape
    out = np.zeros((n, k + dp1), dtype=np.result_type(B, V))
    for j in range(k + 1):
        out[:, j : j + dp1] += B[j] @ V
    return out


def _poly_adjoint(B: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Adjoint of the lifted operator: out[:, l] = sum_j B_j^* Z[:, j+l]."""
    k = B.shape[0] - 1
    n, rows = Z.shape
    dp1 = rows - k
    out = np.zeros((n, dp1), dtype=np.result_type(B, Z))
    for j in range(k + 1):
        out += B[j].conj().T @ Z[:, j : j + dp1]
    return out


class UnstructuredPolynomialOracle:
    """Kronecker fast path for unstructured coefficient perturbations.

    Coordinates are the raw stacked coefficients vec([Delta_0 ... Delta_k]),
    so the coordinate norm is ||Delta(x)||_F with no lift rescaling.
    """

    has_hessian = True
    distance_scale = 1.0

    def __init__(self, poly: MatrixPolynomial, d: int):
        if d < 0:
            raise ValueError("kernel degree d must be >= 0")
        self.poly = poly
        self.d = d
        self.k = poly.grade
        self.n = poly.size
        self.rows = self.k + self.d + 1  # block rows of the lifted system

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self.poly.coeffs) else "real"

    @property
    def ambient_n(self) -> int:
        return self.n * (self.d + 1)

    def spectral_start(self, ell: int = 1):
        if ell != 1:
            return None
        _, _, vh = np.linalg.svd(toeplitz_lift(self.poly, self.d))
        return vh[-1].conj()

    def _unstack(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (self.ambient_n,):
            raise ValueError(f"expected stacked kernel of length {self.ambient_n}")
        return v.reshape(self.n, self.d + 1, order="F")

    def _solve_gram(self, E: np.ndarray, U: np.ndarray, s: np.ndarray, eps: float) -> np.ndarray:
        """Apply ((T T^* + eps I)^{-1} (x) I_n) to a coefficient matrix E."""
        C = E @ U.conj()
        out = (C / (s**2 + eps)) @ U.T
        if U.shape[0] > U.shape[1]:
            out = out + (E - C @ U.T) / eps
        return out

    def evaluate(self, v, eps: float, y=None) -> InnerEvaluation:
        if eps <= 0:
            raise ValueError(f"regularization parameter must be positive, got {eps}")
        V = self._unstack(v)
        T = _row_toeplitz(V, self.k)
        U, s, _ = np.linalg.svd(T, full_matrices=False)
        R = -_poly_apply(self.poly.coeffs, V)
        if y is not None:
            R = R - eps * np.asarray(y).reshape(self.n, self.rows, order="F")
        Z = self._solve_gram(R, U, s, eps)
        value = float(np.real(np.sum(np.conj(R) * Z)))
        D = Z @ np.conj(T)  # [Delta_0 ... Delta_k]
        delta = D.reshape(-1, order="F")
        Delta = self._blocks(D)
        ev = InnerEvaluation(
            M=None,
            r=R.reshape(-1, order="F"),
            z=Z.reshape(-1, order="F"),
            delta_star=delta,
            Delta_star=Delta,
            value=value,
            eps=eps,
            sigma_min_override=float(s.min()) if s.size else 0.0,
        )
        ev._T = T
        ev._Usvd = U
        ev._ssvd = s
        ev._Zmat = Z
        ev._B = self.poly.coeffs + Delta
        return ev

    def _blocks(self, D: np.ndarray) -> np.ndarray:
        """Split the n x n(k+1) row of blocks into a (k+1, n, n) stack."""
        return np.stack([D[:, j * self.n : (j + 1) * self.n] for j in range(self.k + 1)])

    def gradient(self, v, eps, y, ev: InnerEvaluation):
        G = -2.0 * _poly_adjoint(ev._B, ev._Zmat)
        return G.reshape(-1, order="F")

    def hessian_vec(self, v, eps, y, ev: InnerEvaluation, w):
        W = self._unstack(w)
        Ttil = _row_toeplitz(W, self.k)
        D1 = ev._Zmat @ np.conj(Ttil)
        E = D1 @ ev._T.T + _poly_apply(ev._B, W)
        Zdot = -self._solve_gram(E, ev._Usvd, ev._ssvd, eps)
        Ddot = D1 + Zdot @ np.conj(ev._T)
        H = -2.0 * _poly_adjoint(self._blocks(Ddot), ev._Zmat) - 2.0 * _poly_adjoint(ev._B, Zdot)
        return H.reshape(-1, order="F")

    def exact_solution(self, v, ev: InnerEvaluation | None = None) -> ExactEvaluation:
        V = self._unstack(v)
        T = _row_toeplitz(V, self.k)
        U, s, _ = np.linalg.svd(T, full_matrices=False)
        R = -_poly_apply(self.poly.coeffs, V)
        smax = s[0] if s.size else 0.0
        mask = s > RANK_TOL * smax if smax > 0 else np.zeros_like(s, dtype=bool)
        inv2 = np.where(mask, 1.0 / np.where(mask, s**2, 1.0), 0.0)
        C = R @ U.conj()
        Z0 = (C * inv2) @ U.T
        g = float(np.real(np.sum(np.conj(R) * Z0)))
        D0 = Z0 @ np.conj(T)
        resid_mat = R - (C * mask) @ U.T
        residual = float(np.linalg.norm(resid_mat))
        rnorm = float(np.linalg.norm(R))
        feasible = residual <= FEAS_TOL * rnorm if rnorm > 0 else True
        return ExactEvaluation(
            feasible,
            g,
            D0.reshape(-1, order="F"),
            self._blocks(D0),
            residual,
            float(s.min()) if s.size else 0.0,
        )

    def refine_feasibility(self, v, ev):
        return None


@dataclass
class PolynomialDistanceSolution:
    """Distance to singularity of a matrix polynomial, with the winning side."""

    solution: Solution
    delta: MatrixPolynomial
    side: str  # "right" (A(x) v(x) = 0) or "left" (v(x)^* A(x) = 0)

    @property
    def distance(self) -> float:
        return self.solution.distance


def polynomial_problem(
    poly: MatrixPolynomial,
    structure: Optional[np.ndarray | Sequence[np.ndarray]],
    d: int,
):
    """Nearness instance for kernel polynomials of degree at most ``d``.

    ``structure`` is a (p, k+1, n, n) stack of basis polynomials, or None for
    unstructured coefficient perturbations (handled by the Kronecker fast
    path).
    """
    if structure is None:
        return UnstructuredPolynomialOracle(poly, d)
    return LiftedPolynomialProblem(poly, np.asarray(structure), d)


def _solution_delta(problem, sol: Solution) -> MatrixPolynomial:
    if isinstance(problem, LiftedPolynomialProblem):
        return problem.delta_polynomial(sol.delta)
    return MatrixPolynomial(np.asarray(sol.Delta))


def polynomial_distance(
    poly: MatrixPolynomial,
    cfg: SolverConfig,
    structure: Optional[np.ndarray] = None,
    d: Optional[int] = None,
) -> PolynomialDistanceSolution:
    """Distance from A(x) to the singular matrix polynomials of the same grade.

    With ``d`` unset, runs the solver on both the right kernel of A(x) and of
    A(x)^T with the halved degree bound floor(k(n-1)/2) and keeps the better
    side; a transposed structure stack is used for the left run.
    """
    k, n = poly.grade, poly.size
    if k < 1 or n < 1:
        raise ValueError("polynomial must have grade >= 1 and size >= 1")
    degrees = [d] if d is not None else [k * (n - 1) // 2]
    run_left = d is None
    results: list[PolynomialDistanceSolution] = []
    for deg in degrees:
        prob = polynomial_problem(poly, structure, deg)
        manifold = Sphere(n * (deg + 1), prob.field)
        sol = solve(prob, manifold, cfg)
        results.append(PolynomialDistanceSolution(sol, _solution_delta(prob, sol), "right"))
        if run_left:
            struct_t = None if structure is None else np.asarray(structure).transpose(0, 1, 3, 2)
            prob_t = polynomial_problem(poly.transposed(), struct_t, deg)
            sol_t = solve(prob_t, manifold, cfg)
            delta_t = _solution_delta(prob_t, sol_t).transposed()
            results.append(PolynomialDistanceSolution(sol_t, delta_t, "left"))
    results.sort(key=lambda r: (not r.solution.feasible, r.distance))
    return results[0]
