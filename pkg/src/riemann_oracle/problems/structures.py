"""Ready-made orthonormal perturbation structures."""

from __future__ import annotations

import numpy as np

from ..oracle import PerturbationBasis


def full_basis(m: int, n: int, dtype=np.float64) -> PerturbationBasis:
    """All of F^{m x n}: the unstructured basis {e_i e_j^*}."""
    mats = np.zeros((m * n, m, n), dtype=dtype)
    k = 0
    for i in range(m):
        for j in range(n):
            mats[k, i, j] = 1.0
            k += 1
    return PerturbationBasis(mats)


def toeplitz_basis(m: int, n: int, dtype=np.float64) -> PerturbationBasis:
    """Toeplitz matrices: one normalized basis matrix per diagonal."""
    mats = []
    for off in range(-(m - 1), n):
        mat = np.zeros((m, n), dtype=dtype)
        idx = np.arange(max(0, -off), min(m, n - off))
        mat[idx, idx + off] = 1.0
        mats.append(mat / np.sqrt(len(idx)))
    return PerturbationBasis(np.stack(mats))


def symmetric_toeplitz_basis(n: int, dtype=np.float64) -> PerturbationBasis:
    """Symmetric Toeplitz matrices: one basis matrix per |diagonal offset|."""
    mats = []
    for off in range(n):
        mat = np.zeros((n, n), dtype=dtype)
        idx = np.arange(n - off)
        mat[idx, idx + off] = 1.0
        if off:
            mat[idx + off, idx] = 1.0
        mats.append(mat / np.linalg.norm(mat))
    return PerturbationBasis(np.stack(mats))
