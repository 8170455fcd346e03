"""Approximate GCD of two scalar polynomials as a structured nearness problem.

deg gcd(p + dp, q + dq) >= d exactly when the scaled two-block Sylvester-type
matrix S_d(p + dp, q + dq) is singular, with the block scaling chosen so that
||(dp, dq)|| = ||S_d(dp, dq)||_F.  The singular-matrix solver produces a
kernel vector whose two blocks are cofactor candidates; the GCD itself is
extracted by alternating linear least squares over convolution systems, and
the *certified* residual ||(p - g u, q - g w)|| is what gets reported, so the
answer always corresponds to an honest degree-d common divisor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import convolution_matrix

from ..manifolds import Sphere
from ..oracle import NearnessProblem, PerturbationBasis
from ..outer import SolverConfig, Solution, solve


@dataclass(frozen=True)
class GcdProblem:
    """Coefficient vectors (lowest degree first) and the target GCD degree."""

    p: np.ndarray
    q: np.ndarray
    d: int

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p))
        q = np.atleast_1d(np.asarray(self.q))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if p.ndim != 1 or q.ndim != 1 or p.size < 2 or q.size < 2:
            raise ValueError("p and q must be coefficient vectors of degree >= 1")
        if p[-1] == 0 or q[-1] == 0:
            raise ValueError("leading coefficients must be nonzero")
        if not 1 <= self.d <= min(self.deg_p, self.deg_q):
            raise ValueError(f"need 1 <= d <= {min(self.deg_p, self.deg_q)}, got d={self.d}")

    @property
    def deg_p(self) -> int:
        return self.p.size - 1

    @property
    def deg_q(self) -> int:
        return self.q.size - 1


def sylvester_build(problem: GcdProblem) -> np.ndarray:
    """Scaled Sylvester-type matrix S_d(p, q) of shape (m+n-d+1) x (n-d+1 + m-d+1)."""
    m, n, d = problem.deg_p, problem.deg_q, problem.d
    left = convolution_matrix(problem.p, n - d + 1, mode="full") / np.sqrt(n - d + 1)
    right = convolution_matrix(problem.q, m - d + 1, mode="full") / np.sqrt(m - d + 1)
    return np.hstack([left, right])


def _sylvester_basis(problem: GcdProblem) -> PerturbationBasis:
    """Basis {S_d(e_j, 0)} u {S_d(0, e_j)}; orthonormal because the per-block
    scaling makes every coefficient direction a unit diagonal."""
    m, n, d = problem.deg_p, problem.deg_q, problem.d
    dtype = np.result_type(problem.p, problem.q, np.float64)
    mats = []
    for j in range(m + 1):
        e = np.zeros(m + 1, dtype=dtype)
        e[j] = 1.0
        mats.append(
            np.hstack(
                [
                    convolution_matrix(e, n - d + 1, mode="full") / np.sqrt(n - d + 1),
                    np.zeros((m + n - d + 1, m - d + 1), dtype=dtype),
                ]
            )
        )
    for j in range(n + 1):
        e = np.zeros(n + 1, dtype=dtype)
        e[j] = 1.0
        mats.append(
            np.hstack(
                [
                    np.zeros((m + n - d + 1, n - d + 1), dtype=dtype),
                    convolution_matrix(e, m - d + 1, mode="full") / np.sqrt(m - d + 1),
                ]
            )
        )
    return PerturbationBasis(np.stack(mats))


@dataclass
class GcdSolution:
    delta_p: np.ndarray
    delta_q: np.ndarray
    u: np.ndarray  # cofactor of p: p + delta_p = g * u
    w: np.ndarray  # cofactor of q: q + delta_q = g * w
    g: np.ndarray  # extracted common divisor, degree d, ||g|| = 1
    distance: float  # certified residual ||(p - g u, q - g w)||
    residual: float  # constraint residual of the inner singular-matrix solve
    solution: Solution = field(repr=False, default=None)
    degree_deficient: bool = False


def _lstsq(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(mat, rhs, rcond=None)[0]


def _certified(problem: GcdProblem, g, u, w) -> float:
    rp = problem.p - np.convolve(g, u)
    rq = problem.q - np.convolve(g, w)
    return float(np.sqrt(np.linalg.norm(rp) ** 2 + np.linalg.norm(rq) ** 2))


def _extract_gcd(problem: GcdProblem, kernel: np.ndarray, p_tilde, q_tilde, refine_iters=25):
    """Cofactors and GCD from the kernel vector, polished by alternating LS."""
    m, n, d = problem.deg_p, problem.deg_q, problem.d
    a = kernel[: n - d + 1] / np.sqrt(n - d + 1)  # a*p~ + b*q~ = 0
    b = kernel[n - d + 1 :] / np.sqrt(m - d + 1)
    # p~ = g (c b'), q~ = -g (c a') for coprime (a, b): fit g against both blocks
    stacked = np.vstack(
        [convolution_matrix(b, d + 1, mode="full"), convolution_matrix(-a, d + 1, mode="full")]
    )
    g = _lstsq(stacked, np.concatenate([p_tilde, q_tilde]))
    u, w = b.copy(), -a.copy()
    best = (np.inf, g, u, w)
    for _ in range(refine_iters):
        u = _lstsq(convolution_matrix(g, m - d + 1, mode="full"), problem.p)
        w = _lstsq(convolution_matrix(g, n - d + 1, mode="full"), problem.q)
        g = _lstsq(
            np.vstack(
                [
                    convolution_matrix(u, d + 1, mode="full"),
                    convolution_matrix(w, d + 1, mode="full"),
                ]
            ),
            np.concatenate([problem.p, problem.q]),
        )
        res = _certified(problem, g, u, w)
        if res < best[0]:
            best = (res, g.copy(), u.copy(), w.copy())
        elif res > best[0] * (1 + 1e-10):
            break
    res, g, u, w = best
    # deterministic normalization: ||g|| = 1 with real positive leading coefficient
    scale = np.linalg.norm(g)
    if scale > 0:
        lead = g[-1]
        phase = lead / abs(lead) if abs(lead) > 0 else 1.0
        g = g / (scale * phase)
        u = u * (scale * phase)
        w = w * (scale * phase)
    return res, g, u, w


def gcd_solve(problem: GcdProblem, cfg: SolverConfig) -> GcdSolution:
    """Nearest polynomial pair with a common divisor of degree >= d.

    Runs the structured singular-matrix solver on S_d(p, q), splits the kernel
    vector into cofactor candidates, extracts g by least squares over the
    stacked convolution systems, and reports the certified residual as the
    distance.  A g whose leading coefficient vanishes is flagged as degree
    deficient rather than rejected.
    """
    A = sylvester_build(problem)
    basis = _sylvester_basis(problem)
    inner = NearnessProblem(A, basis)
    fld = "complex" if np.iscomplexobj(problem.p) or np.iscomplexobj(problem.q) else "real"
    manifold = Sphere(A.shape[1], fld)
    sol = solve(inner, manifold, cfg)
    m, n = problem.deg_p, problem.deg_q
    dp = sol.delta[: m + 1]
    dq = sol.delta[m + 1 :]
    cert, g, u, w = _extract_gcd(problem, sol.v, problem.p + dp, problem.q + dq)
    deficient = abs(g[-1]) <= 1e-8 * np.linalg.norm(g)
    return GcdSolution(
        delta_p=np.convolve(g, u) - problem.p,
        delta_q=np.convolve(g, w) - problem.q,
        u=u,
        w=w,
        g=g,
        distance=cert,
        residual=sol.residual,
        solution=sol,
        degree_deficient=bool(deficient),
    )
