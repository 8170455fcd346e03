"""Unit-sphere and Grassmann manifold primitives over R or C.

Both manifolds are treated as *real* Riemannian manifolds: for complex data
every inner product below is Re<a, b>, so the unit sphere in C^n behaves as
the real sphere of dimension 2n-1.  Points and tangent vectors are plain
numpy arrays; the classes here are stateless geometry policies supplying
tangent projection, retraction and Euclidean-to-Riemannian derivative
conversion to the optimizer.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

Field = Literal["real", "complex"]


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product Re<a, b>; Frobenius pairing for matrix arguments."""
    return float(np.real(np.vdot(a, b)))


def real_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def _check_field(field: str) -> None:
    if field not in ("real", "complex"):
        raise ValueError(f"field must be 'real' or 'complex', got {field!r}")


def _sign_fixed_qr(x: np.ndarray) -> np.ndarray:
    """Orthonormal QR factor with the diagonal of R made real and positive."""
    q, r = np.linalg.qr(x)
    d = np.diagonal(r).copy()
    s = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * s.conj()


class Sphere:
    """Unit sphere { v in F^n : ||v|| = 1 } with the real trace metric."""

    def __init__(self, n: int, field: Field = "real"):
        if n < 1:
            raise ValueError(f"sphere needs n >= 1, got n={n}")
        _check_field(field)
        self.n = n
        self.field = field

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    @property
    def dim(self) -> int:
        return (2 * self.n - 1) if self.field == "complex" else (self.n - 1)

    def _check_shape(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        if z.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {z.shape}")
        return z

    def project_tangent(self, v: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Project an ambient vector onto {w : Re<v, w> = 0}."""
        z = self._check_shape(z)
        return z - v * real_inner(v, z)

    def retract(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """First-order retraction (v + w) / ||v + w||; exact at w = 0."""
        w = self._check_shape(w)
        if not np.any(w):
            return v
        x = v + w
        return x / np.linalg.norm(x)

    def riemannian_gradient(self, v: np.ndarray, egrad: np.ndarray) -> np.ndarray:
        return self.project_tangent(v, egrad)

    def riemannian_hessian_vec(
        self,
        v: np.ndarray,
        egrad: np.ndarray,
        ehess_w: np.ndarray,
        w: np.ndarray,
    ) -> np.ndarray:
        """Weingarten correction: P(ehess_w) - w * Re<v, egrad>."""
        ehess_w = self._check_shape(ehess_w)
        return self.project_tangent(v, ehess_w) - w * real_inner(v, egrad)

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        v = rng.standard_normal(self.n)
        if self.field == "complex":
            v = v + 1j * rng.standard_normal(self.n)
        return v / np.linalg.norm(v)

    def random_tangent(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Unit-norm tangent vector at v, sampled from a projected Gaussian."""
        z = rng.standard_normal(self.n)
        if self.field == "complex":
            z = z + 1j * rng.standard_normal(self.n)
        w = self.project_tangent(v, z)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:  # measure-zero; retry deterministically
            return self.random_tangent(v, rng)
        return w / nrm

    def point_defect(self, v: np.ndarray) -> float:
        """Violation of the point invariant, | ||v|| - 1 |."""
        return abs(float(np.linalg.norm(v)) - 1.0)

    def tangent_defect(self, v: np.ndarray, w: np.ndarray) -> float:
        return abs(real_inner(v, w))


class Grassmann:
    """Grassmannian of ell-dimensional subspaces of F^n.

    Points are n x ell matrices with orthonormal columns (a representative of
    the subspace); tangent vectors W satisfy V^* W = 0.  The metric is the
    real trace metric Re tr(W1^* W2).
    """

    def __init__(self, n: int, ell: int, field: Field = "real"):
        if not 1 <= ell <= n:
            raise ValueError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
        _check_field(field)
        self.n = n
        self.ell = ell
        self.field = field

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n, self.ell)

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    @property
    def dim(self) -> int:
        d = self.ell * (self.n - self.ell)
        return 2 * d if self.field == "complex" else d

    def _check_shape(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        if z.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {z.shape}")
        return z

    def project_tangent(self, v: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Project onto the horizontal space {W : V^* W = 0}."""
        z = self._check_shape(z)
        return z - v @ (v.conj().T @ z)

    def retract(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """QR retraction with sign-fixed R diagonal; exact at w = 0."""
        w = self._check_shape(w)
        if not np.any(w):
            return v
        return _sign_fixed_qr(v + w)

    def riemannian_gradient(self, v: np.ndarray, egrad: np.ndarray) -> np.ndarray:
        return self.project_tangent(v, egrad)

    def riemannian_hessian_vec(
        self,
        v: np.ndarray,
        egrad: np.ndarray,
        ehess_w: np.ndarray,
        w: np.ndarray,
    ) -> np.ndarray:
        ehess_w = self._check_shape(ehess_w)
        return self.project_tangent(v, ehess_w) - w @ (v.conj().T @ egrad)

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.shape)
        if self.field == "complex":
            z = z + 1j * rng.standard_normal(self.shape)
        return _sign_fixed_qr(z)

    def random_tangent(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.shape)
        if self.field == "complex":
            z = z + 1j * rng.standard_normal(self.shape)
        w = self.project_tangent(v, z)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return self.random_tangent(v, rng)
        return w / nrm

    def point_defect(self, v: np.ndarray) -> float:
        """Violation of V^* V = I in the max norm."""
        g = v.conj().T @ v - np.eye(self.ell)
        return float(np.max(np.abs(g)))

    def tangent_defect(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(np.max(np.abs(v.conj().T @ w)))


Manifold = Sphere | Grassmann
