"""Small dense linear-algebra helpers used by the trainers and the FK solver.

Everything is float64. The systems involved are tiny (a few dozen unknowns
for the LM normal equations, at most a few thousand rows by ~21 columns for
the RBF output fit), so plain dense kernels are enough.
"""
import numpy as np
from scipy import linalg

from .exceptions import InvalidArgumentError, NumericalError, ShapeError

JITTER_STEP = 10.0
JITTER_CAP = 1e-3  # relative to trace(A) / n


def _as_matrix(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name} contains non-finite entries")
    return A


def matmul(A, B):
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def solve_spd(A, b, jitter=0.0):
    """Solve ``(A + jitter*I) x = b`` by Cholesky.

    If the factorization fails the jitter is raised tenfold (starting from
    ``1e-12 * trace(A)/n`` when zero) until it would exceed
    ``1e-3 * trace(A)/n``; past that a :class:`NumericalError` is raised.
    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = _as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ShapeError(f"A must be square, got {A.shape}")
    if jitter < 0:
        raise InvalidArgumentError("jitter must be >= 0")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != n:
        raise ShapeError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * np.abs(A).max(initial=0.0)):
        raise InvalidArgumentError("A must be symmetric")

    scale = np.trace(A) / n if n else 0.0
    cap = JITTER_CAP * scale
    while True:
        try:
            factor = linalg.cho_factor(A + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            factor = None
        if factor is not None:
            x = linalg.cho_solve(factor, b, check_finite=False)
            if np.all(np.isfinite(x)):
                return x
        if scale <= 0:
            break
        jitter = 1e-12 * scale if jitter == 0 else jitter * JITTER_STEP
        if jitter > cap:
            break
    raise NumericalError("matrix is not positive definite even after jitter escalation")


def least_squares(A, B):
    """Minimize ``||A X - B||_F`` for a tall ``A``.

    Householder QR on the column-equilibrated matrix; when ``R`` is
    numerically singular the normal equations are solved with
    :func:`solve_spd` and its jitter escalation instead.
    """
    A = _as_matrix(A, "A")
    B = np.asarray(B, dtype=float)
    vector_rhs = B.ndim == 1
    if vector_rhs:
        B = B[:, None]
    B = _as_matrix(B, "B")
    m, n = A.shape
    if m < n:
        raise ShapeError(f"least_squares needs rows >= cols, got {A.shape}")
    if B.shape[0] != m:
        raise ShapeError(f"B has {B.shape[0]} rows, A has {m}")

    norms = np.sqrt(np.einsum("ij,ij->j", A, A))
    if np.any(norms == 0):
        raise NumericalError("design matrix has an all-zero column")
    As = A / norms
    Q, R = np.linalg.qr(As, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() > max(m, n) * np.finfo(float).eps * diag.max():
        X = linalg.solve_triangular(R, Q.T @ B, lower=False, check_finite=False)
    else:
        X = solve_spd(As.T @ As, As.T @ B)
    X = X / norms[:, None]
    if not np.all(np.isfinite(X)):
        raise NumericalError("least-squares solution is not finite")
    return X[:, 0] if vector_rhs else X


def finite_difference_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian of ``f`` at ``x``; entry (i, j) is df_i/dx_j."""
    if not h > 0:
        raise InvalidArgumentError("step h must be > 0")
    x = np.asarray(x, dtype=float).ravel()
    columns = []
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        hi = np.atleast_1d(np.asarray(f(x + step), dtype=float)).ravel()
        lo = np.atleast_1d(np.asarray(f(x - step), dtype=float)).ravel()
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise NumericalError(f"function value not finite while perturbing x[{j}]")
        columns.append((hi - lo) / (2.0 * h))
    return np.column_stack(columns)
