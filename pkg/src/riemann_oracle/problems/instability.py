"""Structured distance to instability: nearest matrix with an eigenvalue in a
prescribed closed region.

The destabilizing eigenvalue can be eliminated from the inner problem: for a
fixed kernel candidate v the regularized value is a quadratic in lambda whose
level sets are circles around lambda_0 = b/a, so the optimal lambda_* is the
Euclidean projection of lambda_0 onto the closed target region.  Treating
lambda_* as locally constant gives an exact first-order gradient (the
envelope argument), but not a Hessian, so this problem runs on the
first-order descent path of the trust-region module.  The field is always
complex: even for real input the minimizer may be genuinely complex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..manifolds import Sphere
from ..oracle import (
    ExactEvaluation,
    InnerEvaluation,
    NearnessProblem,
    PerturbationBasis,
    assemble_M,
    exact_least_squares,
)
from ..outer import SolverConfig, Solution, solve


@dataclass(frozen=True)
class Region:
    """Closed target region for the destabilizing eigenvalue.

    kinds: "half_plane"      -> { Re z >= param }
           "disc_complement" -> { |z| >= param }
           "closed_disc"     -> { |z| <= param }
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("half_plane", "disc_complement", "closed_disc"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind in ("disc_complement", "closed_disc") and self.param <= 0:
            raise ValueError("disc regions need a positive radius")

    def contains(self, z: complex) -> bool:
        if self.kind == "half_plane":
            return z.real >= self.param
        if self.kind == "disc_complement":
            return abs(z) >= self.param
        return abs(z) <= self.param

    def project(self, z: complex) -> complex:
        return region_project(self, z)


def region_project(region: Region, z: complex) -> complex:
    """Euclidean projection onto the closed region; deterministic tie-breaks.

    The only non-unique point is the center of a disc complement, which is
    sent to +radius on the real axis.
    """
    z = complex(z)
    if region.contains(z):
        return z
    if region.kind == "half_plane":
        return complex(region.param, z.imag)
    if z == 0:  # medial axis of the disc complement
        return complex(region.param, 0.0)
    return region.param * z / abs(z)


class InstabilityOracle:
    """Inner oracle for the nearest matrix with an eigenvalue in the region."""

    has_hessian = False  # the projection breaks the second-order expansion
    distance_scale = 1.0

    def __init__(self, A: np.ndarray, basis: PerturbationBasis, region: Region):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("distance to instability needs a square matrix")
        if A.shape != (basis.m, basis.n):
            raise ValueError("basis shape does not match the matrix")
        self.A = A.astype(np.complex128)
        self.basis = PerturbationBasis(basis.matrices.astype(np.complex128))
        self.region = region
        self.n = A.shape[0]

    field = "complex"

    def spectral_start(self, ell: int = 1):
        if ell != 1:
            return None
        vals, vecs = np.linalg.eig(self.A)
        dist = np.abs(vals - np.array([self.region.project(z) for z in vals]))
        v = vecs[:, int(np.argmin(dist))]
        return v / np.linalg.norm(v)

    def evaluate(self, v, eps: float, y=None) -> InnerEvaluation:
        if eps <= 0:
            raise ValueError(f"regularization parameter must be positive, got {eps}")
        v = np.asarray(v, dtype=np.complex128)
        if v.ndim != 1:
            raise ValueError("instability oracle expects a kernel vector")
        M = assemble_M(self.basis, v)
        u, s, vh = np.linalg.svd(M, full_matrices=False)
        g_vec = self.A @ v
        if y is not None:
            g_vec = g_vec + eps * np.asarray(y)

        def solve_gram(t):
            c = u.conj().T @ t
            out = u @ (c / (s**2 + eps))
            if u.shape[0] > u.shape[1]:
                out = out + (t - u @ c) / eps
            return out

        q0 = solve_gram(v)
        qa = solve_gram(g_vec)
        a = float(np.real(np.vdot(v, q0)))
        b = complex(np.vdot(v, qa))
        c_val = float(np.real(np.vdot(g_vec, qa)))
        lam0 = b / a
        lam = region_project(self.region, lam0)
        r = lam * v - g_vec
        z = lam * q0 - qa
        value = float(np.real(np.vdot(r, z)))
        delta = M.conj().T @ z
        Delta = self.basis.combine(delta)
        ev = InnerEvaluation(M, r, z, delta, Delta, value, eps, u, s, vh)
        ev.lambda_star = lam
        ev.lambda0 = lam0
        ev.abc = (a, b, c_val)
        return ev

    def gradient(self, v, eps, y, ev: InnerEvaluation):
        """-2 (A - lambda_* I + Delta_*)^* z with lambda_* held constant."""
        shifted = self.A - ev.lambda_star * np.eye(self.n) + ev.Delta_star
        return -2.0 * shifted.conj().T @ ev.z

    def hessian_vec(self, v, eps, y, ev, w):
        raise NotImplementedError("exact Hessian unavailable for the projected eigenvalue")

    def exact_solution(self, v, ev: InnerEvaluation | None = None) -> ExactEvaluation:
        v = np.asarray(v, dtype=np.complex128)
        if ev is None:
            ev = self.evaluate(v, 1e-12)
        lam = ev.lambda_star
        M = assemble_M(self.basis, v)
        r = -(self.A - lam * np.eye(self.n)) @ v
        return exact_least_squares(self.basis, M, r)

    def refine_feasibility(self, v, ev):
        return None


def instability_solve(
    A: np.ndarray, basis: PerturbationBasis, region: Region, cfg: SolverConfig
) -> Solution:
    """Distance from A to the matrices with an eigenvalue in the region.

    An input that is already unstable (some eigenvalue inside the region)
    returns distance zero immediately.  The returned solution carries the
    destabilizing eigenvalue; a warning is attached when A + Delta fails to
    have an eigenvalue within 1e-8 of it.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("distance to instability needs a square matrix")
    vals, vecs = np.linalg.eig(A.astype(np.complex128))
    inside = [i for i, z in enumerate(vals) if region.contains(z)]
    if inside:
        i = inside[0]
        n = A.shape[0]
        return Solution(
            delta=np.zeros(basis.p, dtype=np.complex128),
            Delta=np.zeros((n, n), dtype=np.complex128),
            v=vecs[:, i] / np.linalg.norm(vecs[:, i]),
            distance=0.0,
            residual=0.0,
            feasible=True,
            trace=[],
            lambda_star=complex(vals[i]),
        )
    oracle = InstabilityOracle(A, basis, region)
    sol = solve(oracle, Sphere(A.shape[0], "complex"), cfg)
    if sol.lambda_star is not None:
        eigs = np.linalg.eigvals(np.asarray(A, dtype=np.complex128) + sol.Delta)
        gap = float(np.min(np.abs(eigs - sol.lambda_star)))
        if gap > 1e-8:
            sol.warnings.append(
                f"certificate gap {gap:.2e}: no eigenvalue of A + Delta within 1e-8 "
                "of the reported destabilizing eigenvalue"
            )
    return sol
