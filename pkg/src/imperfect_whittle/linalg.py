"""Small dense linear solves by Gaussian elimination with partial pivoting."""
from __future__ import annotations

import numpy as np

from .errors import SolverDegenerateError

PIVOT_TOL = 1e-12


def solve(A, b, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``A x = b`` for one or several right-hand-side columns.

    Raises SolverDegenerateError when a pivot falls below ``pivot_tol``.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"incompatible shapes {A.shape} and {b.shape}")
    vector = b.ndim == 1
    if vector:
        b = b[:, None]

    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) < pivot_tol:
            raise SolverDegenerateError(f"pivot {A[p, k]:.3e} in column {k}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        lam = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(lam, A[k, k:])
        b[k + 1:] -= np.outer(lam, b[k])

    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x[:, 0] if vector else x
