"""Dense linear algebra used by the pursuit solvers.

Matrices and vectors are plain float64 numpy arrays. Matrices are kept in
column-major (Fortran) order so column extraction and the column
dot-products of the identification step stay contiguous.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-10


class RankDeficient(np.linalg.LinAlgError):
    """Raised when a support set yields a numerically rank-deficient sub-dictionary."""

    def __init__(self, column: int, ratio: float):
        self.column = column
        self.ratio = ratio
        super().__init__(
            f"column {column} is numerically dependent (|R_jj|/max|R_ii| = {ratio:.3e})"
        )


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    return np.asfortranarray(a)


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    return v


def matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    if A.shape[1] != v.shape[0]:
        raise ValueError(f"matvec: A has {A.shape[1]} columns, v has length {v.shape[0]}")
    return A @ v


def transpose_matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    if A.shape[0] != v.shape[0]:
        raise ValueError(f"transpose_matvec: A has {A.shape[0]} rows, v has length {v.shape[0]}")
    return A.T @ v


def select_columns(A: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """Sub-matrix with the columns ``idx`` in the given order."""
    idx = [int(i) for i in idx]
    if not idx:
        raise ValueError("select_columns: empty index list")
    if len(set(idx)) != len(idx):
        raise ValueError(f"select_columns: duplicate indices in {idx}")
    ncols = A.shape[1]
    bad = [i for i in idx if i < 0 or i >= ncols]
    if bad:
        raise IndexError(f"select_columns: indices {bad} out of range [0, {ncols})")
    return np.asfortranarray(A[:, idx])


def lstsq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``A U ~= B`` through a Householder QR of ``A``.

    ``B`` may be a vector or an (m, p) matrix of right-hand sides; all columns
    share one factorization. Raises :class:`RankDeficient` when a diagonal
    entry of R falls below ``RANK_TOL`` times the largest one.
    """
    m, k = A.shape
    if m < k:
        raise ValueError(f"lstsq: underdetermined system ({m} rows < {k} columns)")
    if B.shape[0] != m:
        raise ValueError(f"lstsq: A has {m} rows, B has {B.shape[0]}")
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    top = diag.max()
    if top == 0.0:
        raise RankDeficient(0, 0.0)
    ratios = diag / top
    low = np.flatnonzero(ratios < RANK_TOL)
    if low.size:
        j = int(low[0])
        raise RankDeficient(j, float(ratios[j]))
    return solve_triangular(R, Q.T @ B, lower=False, check_finite=False)
