"""Independent reference implementations used only by the tests."""

import numpy as np


def naive_matvec(A, v):
    out = np.zeros(A.shape[0])
    for i in range(A.shape[0]):
        s = 0.0
        for j in range(A.shape[1]):
            s += A[i, j] * v[j]
        out[i] = s
    return out


def naive_transpose_matvec(A, v):
    out = np.zeros(A.shape[1])
    for j in range(A.shape[1]):
        s = 0.0
        for i in range(A.shape[0]):
            s += A[i, j] * v[i]
        out[j] = s
    return out


def textbook_omp(A, y, K):
    """Plain OMP: one atom per pass, refit with numpy's SVD-based lstsq."""
    chosen = []
    r = y.copy()
    for _ in range(K):
        c = np.abs(A.T @ r)
        c[chosen] = -1.0
        chosen.append(int(np.argmax(c)))
        coef = np.linalg.lstsq(A[:, chosen], y, rcond=None)[0]
        r = y - A[:, chosen] @ coef
        if np.linalg.norm(r) <= 1e-6 * np.linalg.norm(y):
            break
    return chosen


def textbook_gomp(A, y, K, N):
    chosen = []
    r = y.copy()
    for _ in range(K):
        c = np.abs(A.T @ r)
        c[chosen] = -1.0
        chosen.extend(int(i) for i in np.argsort(-c, kind="stable")[:N])
        coef = np.linalg.lstsq(A[:, chosen], y, rcond=None)[0]
        r = y - A[:, chosen] @ coef
        if np.linalg.norm(r) <= 1e-6 * np.linalg.norm(y):
            break
    return chosen
