"""Nearest singular matrix with a prescribed sparsity pattern.

The induced perturbation basis {e_i e_j^* : (i, j) in the pattern} has
disjoint supports, so the Gram matrix M M^* is diagonal with entries
d_i = sum_{(i,j)} |v_j|^2.  Values, gradients and Hessian-vector products
then cost O(#pattern + nnz(A)) instead of a dense factorization, which is
what makes large sparse instances tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..oracle import (
    FEAS_TOL,
    RANK_TOL,
    ExactEvaluation,
    InnerEvaluation,
    NearnessProblem,
    PerturbationBasis,
)


@dataclass(frozen=True)
class SparsePattern:
    """Index set of admissible entries of an m x n perturbation."""

    rows: np.ndarray
    cols: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("rows and cols must be index vectors of equal length")
        if rows.size == 0:
            raise ValueError("pattern must be nonempty")
        m, n = self.shape
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
            raise ValueError("pattern indices out of range")
        if len({(int(i), int(j)) for i, j in zip(rows, cols)}) != rows.size:
            raise ValueError("pattern contains duplicate entries")

    @property
    def size(self) -> int:
        return int(self.rows.size)

    @classmethod
    def from_matrix(cls, a) -> "SparsePattern":
        """Pattern of the nonzero entries of a (sparse or dense) matrix."""
        if sp.issparse(a):
            coo = a.tocoo()
            return cls(coo.row.copy(), coo.col.copy(), coo.shape)
        a = np.asarray(a)
        rows, cols = np.nonzero(a)
        return cls(rows, cols, a.shape)


def pattern_basis(pattern: SparsePattern, dtype=np.float64) -> PerturbationBasis:
    """Materialized basis {e_i e_j^*}; for small instances and cross-checks."""
    mats = np.zeros((pattern.size, *pattern.shape), dtype=dtype)
    mats[np.arange(pattern.size), pattern.rows, pattern.cols] = 1.0
    return PerturbationBasis(mats)


class SparseNearness:
    """Fast-path oracle for sparsity-pattern perturbations (kernel vectors only)."""

    has_hessian = True
    distance_scale = 1.0

    def __init__(self, A, pattern: SparsePattern):
        if A.shape != pattern.shape:
            raise ValueError(f"A has shape {A.shape}, pattern expects {pattern.shape}")
        self.A = A.tocsr() if sp.issparse(A) else np.asarray(A)
        self.pattern = pattern
        self.m, self.n = pattern.shape

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self.A) else "real"

    @property
    def contains_A(self) -> bool:
        dense = self.A.toarray() if sp.issparse(self.A) else self.A
        mask = np.zeros(self.pattern.shape, dtype=bool)
        mask[self.pattern.rows, self.pattern.cols] = True
        return bool(np.all(dense[~mask] == 0))

    def spectral_start(self, ell: int = 1):
        if ell != 1 or min(self.m, self.n) > 600:
            return None
        dense = self.A.toarray() if sp.issparse(self.A) else self.A
        _, _, vh = np.linalg.svd(dense)
        return vh[-1].conj()

    # -- O(#pattern) kernels ----------------------------------------------
    def _gram_diag(self, v: np.ndarray) -> np.ndarray:
        d = np.zeros(self.m)
        np.add.at(d, self.pattern.rows, np.abs(v[self.pattern.cols]) ** 2)
        return d

    def _delta_matrix(self, vals: np.ndarray):
        if sp.issparse(self.A):
            return sp.coo_array((vals, (self.pattern.rows, self.pattern.cols)), shape=self.pattern.shape)
        out = np.zeros(self.pattern.shape, dtype=vals.dtype)
        out[self.pattern.rows, self.pattern.cols] = vals
        return out

    def evaluate(self, v, eps: float, y=None) -> InnerEvaluation:
        """f_{eps,y}(v) = sum_i |(Av + eps y)_i|^2 / (d_i + eps) via the diagonal Gram."""
        if eps <= 0:
            raise ValueError(f"regularization parameter must be positive, got {eps}")
        v = np.asarray(v)
        if v.ndim != 1:
            raise ValueError("sparse fast path handles kernel vectors, not blocks")
        d = self._gram_diag(v)
        r = -(self.A @ v)
        if y is not None:
            r = r - eps * np.asarray(y)
        z = r / (d + eps)
        value = float(np.real(np.vdot(r, z)))
        # delta_{(i,j)} = conj(v_j) z_i
        vals = np.conj(v[self.pattern.cols]) * z[self.pattern.rows]
        ev = InnerEvaluation(
            M=None,
            r=r,
            z=z,
            delta_star=vals,
            Delta_star=self._delta_matrix(vals),
            value=value,
            eps=eps,
        )
        ev._d = d  # cached Gram diagonal, reused by the Hessian and refinement
        ev.sigma_min_override = float(np.sqrt(d.min())) if d.size else 0.0
        return ev

    def gradient(self, v, eps, y, ev: InnerEvaluation):
        """-2 A^* z - 2 f (.) v with column weights f_j = sum_{(i,j)} |z_i|^2."""
        f = np.zeros(self.n)
        np.add.at(f, self.pattern.cols, np.abs(ev.z[self.pattern.rows]) ** 2)
        AH = self.A.conj().T
        return -2.0 * (AH @ ev.z) - 2.0 * f * v

    def hessian_vec(self, v, eps, y, ev: InnerEvaluation, w):
        w = np.asarray(w)
        rows, cols = self.pattern.rows, self.pattern.cols
        z, d = ev.z, ev._d
        # t_i = sum_{(i,j)} v_j conj(w_j), so (M Mdot^* z)_i = t_i z_i
        t = np.zeros(self.m, dtype=np.result_type(v, w))
        np.add.at(t, rows, v[cols] * np.conj(w[cols]))
        # (Delta_* w)_i = z_i sum_{(i,j)} conj(v_j) w_j = z_i conj(t_i)... careful:
        s = np.zeros(self.m, dtype=np.result_type(v, w))
        np.add.at(s, rows, np.conj(v[cols]) * w[cols])
        Bw = self.A @ w + z * s
        zdot = -(t * z + Bw) / (d + eps)
        # column sums f_j = sum |z_i|^2 and q_j = sum conj(z_i) zdot_i over the pattern
        f = np.zeros(self.n)
        np.add.at(f, cols, np.abs(z[rows]) ** 2)
        q = np.zeros(self.n, dtype=np.result_type(z, zdot))
        np.add.at(q, cols, np.conj(z[rows]) * zdot[rows])
        AH = self.A.conj().T
        # -2 ( Deltadot^* z + (A + Delta_*)^* zdot )
        return -2.0 * (w * f + v * np.conj(q) + AH @ zdot + v * q)

    def exact_solution(self, v, ev: InnerEvaluation | None = None) -> ExactEvaluation:
        v = np.asarray(v)
        d = self._gram_diag(v)
        r = -(self.A @ v)
        rnorm = float(np.linalg.norm(r))
        dmax = d.max() if d.size else 0.0
        mask = d > (RANK_TOL**2) * dmax if dmax > 0 else np.zeros_like(d, dtype=bool)
        z = np.where(mask, r / np.where(mask, d, 1.0), 0.0)
        vals = np.conj(v[self.pattern.cols]) * z[self.pattern.rows]
        g = float(np.real(np.vdot(r[mask], z[mask])))
        residual = float(np.linalg.norm(r[~mask]))
        feasible = residual <= FEAS_TOL * rnorm if rnorm > 0 else True
        sigma = float(np.sqrt(d.min())) if d.size else 0.0
        return ExactEvaluation(feasible, g, vals, self._delta_matrix(vals), residual, sigma)

    def refine_feasibility(self, v, ev: InnerEvaluation):
        """Zero the residual components with d_i <= 1e-16 and pull back through A."""
        if self.m != self.n:
            return None
        r_reg = np.where(ev._d > 1e-16, ev.r, 0.0)
        if sp.issparse(self.A):
            from scipy.sparse.linalg import spsolve

            v_reg = -spsolve(self.A.tocsc(), r_reg)
        else:
            try:
                v_reg = -np.linalg.solve(self.A, r_reg)
            except np.linalg.LinAlgError:
                return None
        nrm = np.linalg.norm(v_reg)
        if not np.isfinite(nrm) or nrm == 0:
            return None
        return v_reg / nrm


def sparse_problem(A, pattern: SparsePattern | None = None) -> SparseNearness:
    """Nearness instance over the perturbations supported on ``pattern``.

    With ``pattern`` omitted, the zero pattern of A itself is used (the
    natural choice when perturbing a sparse matrix without fill-in).
    """
    if pattern is None:
        pattern = SparsePattern.from_matrix(A)
    return SparseNearness(A, pattern)


def to_generic(problem: SparseNearness) -> NearnessProblem:
    """Materialize the pattern basis; the slow reference twin for cross-checks."""
    dense = problem.A.toarray() if sp.issparse(problem.A) else problem.A
    dtype = np.complex128 if np.iscomplexobj(dense) else np.float64
    return NearnessProblem(dense, pattern_basis(problem.pattern, dtype))
