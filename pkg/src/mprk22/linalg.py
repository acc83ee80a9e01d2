"""Small dense linear solver."""
from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError, ValidationError

PIVOT_RTOL = 1e-14


def solve_dense(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M x = rhs`` by Gaussian elimination with partial pivoting.

    ``rhs`` may be a vector or a matrix of right-hand sides.  Raises
    :class:`SingularMatrixError` when a pivot magnitude drops below
    ``1e-14`` times the largest magnitude in its column of ``M``.  The
    column scale (rather than the global ``max|M|``) keeps badly scaled
    M-matrices, whose columns can differ by many orders of magnitude,
    solvable.
    """
    A = np.array(M, dtype=float)
    b = np.array(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    if b.shape[0] != n:
        raise ValidationError(f"rhs has {b.shape[0]} rows, matrix has {n}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValidationError("non-finite entries in linear system")
    vector = b.ndim == 1
    if vector:
        b = b[:, None]

    col_scale = np.max(np.abs(A), axis=0, initial=0.0)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        tol = PIVOT_RTOL * col_scale[k]
        if abs(A[p, k]) <= tol or col_scale[k] == 0.0:
            raise SingularMatrixError(
                f"pivot {abs(A[p, k]):.3e} in column {k} below threshold {tol:.3e}",
                component=k)
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        if k + 1 < n:
            f = A[k + 1:, k] / A[k, k]
            A[k + 1:, k:] -= np.outer(f, A[k, k:])
            b[k + 1:] -= np.outer(f, b[k])

    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x[:, 0] if vector else x


def solve_mmatrix(M: np.ndarray, rhs: np.ndarray, col_sums: np.ndarray | float = 1.0
                  ) -> np.ndarray:
    """Solve ``M x = rhs`` for an M-matrix with known positive column sums.

    Gaussian elimination without pivoting in which every pivot is rebuilt
    from the column sums of the active Schur complement and its
    off-diagonal entries (Grassmann-Taksar-Heyman style).  Only sums of
    same-sign terms occur, so for ``rhs >= 0`` every component of ``x`` is
    accurate to a few ulps and ``1^T x = 1^T rhs`` holds to rounding when
    the column sums are one.  The diagonal of ``M`` is not read.
    """
    A = np.array(M, dtype=float)
    b = np.array(rhs, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValidationError(f"shape mismatch: matrix {A.shape}, rhs {b.shape}")
    c = np.broadcast_to(np.asarray(col_sums, dtype=float), (n,)).copy()
    off = A[~np.eye(n, dtype=bool)]
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValidationError("non-finite entries in linear system")
    if np.any(off > 0) or np.any(~(c > 0)):
        raise ValidationError("not an M-matrix with positive column sums")

    for k in range(n):
        piv = c[k] - A[k + 1:, k].sum()
        if not piv > 0:
            raise SingularMatrixError(f"nonpositive pivot {piv!r} in column {k}", component=k)
        A[k, k] = piv
        if k + 1 < n:
            A[k + 1:, k] /= piv
            c[k + 1:] -= (c[k] / piv) * A[k, k + 1:]
            A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])

    for k in range(n - 1):
        b[k + 1:] -= A[k + 1:, k] * b[k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x
