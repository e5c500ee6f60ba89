"""Dense factor-matrix helpers for CP-ALS.

Factor matrices are plain float64 ndarrays of shape (extent, rank); one
column per component.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product.

    For a of shape (i, r) and b of shape (j, r), returns the (i * j, r)
    matrix whose column c is kron(a[:, c], b[:, c]): row p * j + q holds
    a[p, c] * b[q, c].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column count mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    i, r = a.shape
    j = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(i * j, r)


def gram(a: np.ndarray) -> np.ndarray:
    """A^T A for a factor matrix A."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("gram expects a matrix")
    return a.T @ a


def hadamard_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise product of same-shaped matrices. The list must be non-empty."""
    if len(mats) == 0:
        raise ValueError("hadamard_all requires at least one matrix")
    out = np.array(mats[0], dtype=np.float64)
    for m in mats[1:]:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != out.shape:
            raise ValueError(f"shape mismatch: {m.shape} vs {out.shape}")
        out *= m
    return out


def solve_gram(g: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve X G = RHS for X, where G is a symmetric gram-product matrix.

    Tries a direct solve first (Cholesky probe for positive definiteness).
    A numerically singular G gets a ridge of 1e-12 * trace(G) / R added to
    the diagonal; if that still fails, or the ridge is zero, falls back to
    the minimum-norm least-squares solution. Never aborts on singular input.
    """
    g = np.asarray(g, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"gram matrix must be square, got {g.shape}")
    if rhs.ndim != 2 or rhs.shape[1] != g.shape[0]:
        raise ValueError(
            f"right-hand side must have {g.shape[0]} columns, got {rhs.shape}"
        )
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(rhs))):
        raise ValueError("solve_gram requires finite inputs")

    try:
        np.linalg.cholesky(g)
        return np.linalg.solve(g, rhs.T).T
    except np.linalg.LinAlgError:
        pass
    r = g.shape[0]
    ridge = 1e-12 * float(np.trace(g)) / r
    if ridge > 0.0:
        try:
            return np.linalg.solve(g + ridge * np.eye(r), rhs.T).T
        except np.linalg.LinAlgError:
            pass
    return np.linalg.lstsq(g, rhs.T, rcond=None)[0].T


def normalize_columns_l1(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale each column to sum to 1, returning (normalized, absorbed sums).

    Column r of the result is a[:, r] / sum(a[:, r]) and weights[r] is the
    absorbed sum, so normalized * weights reconstructs the input. Columns
    summing to exactly zero are left unchanged and get weight 0; they cannot
    be normalized and callers treat them as dead components.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("normalize_columns_l1 expects a matrix")
    col_sums = a.sum(axis=0)
    divisors = np.where(col_sums != 0.0, col_sums, 1.0)
    normalized = a / divisors
    weights = np.where(col_sums != 0.0, col_sums, 0.0)
    return normalized, weights
