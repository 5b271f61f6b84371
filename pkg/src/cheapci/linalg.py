"""Dense symmetric positive-definite linear algebra for small matrices.

Everything here targets K x K matrices with K up to a few dozen: the
joint-CLT covariance shapes of the interval formulas. Factorization is
a plain left-looking Cholesky so that near-singularity is detected with
an explicit pivot tolerance and surfaced as :class:`NotSPDError` rather
than silently regularized; a degenerate covariance shape means the
batching plan itself is invalid.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .rng import RngStream

# Pivots at or below this fraction of the largest diagonal entry are
# treated as loss of positive definiteness.
PIVOT_RTOL = 1e-12


class NotSPDError(ValueError):
    """Matrix is not symmetric positive definite."""


def check_symmetric(m: np.ndarray) -> np.ndarray:
    """Validate and return a square, exactly symmetric float matrix."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("matrix dimension must be >= 1")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    if not (a == a.T).all():
        raise ValueError("matrix is not symmetric")
    return a


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m, or NotSPDError."""
    a = check_symmetric(m)
    k = a.shape[0]
    tol = PIVOT_RTOL * float(a.diagonal().max(initial=0.0))
    lower = np.zeros_like(a)
    for j in range(k):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= tol:
            raise NotSPDError(
                f"matrix is not positive definite: pivot {pivot:.3e} at column {j} "
                f"(tolerance {tol:.3e})"
            )
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < k:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def solve_cholesky(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L @ L.T) x = b given the Cholesky factor L."""
    y = solve_triangular(lower, b, lower=True)
    return solve_triangular(lower, y, lower=True, trans="T")


def solve_spd(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve m @ x = b for symmetric positive definite m."""
    return solve_cholesky(cholesky(m), np.asarray(b, dtype=float))


def quad_form_inv(m: np.ndarray, r: np.ndarray, lower: np.ndarray | None = None) -> float:
    """Quadratic form r.T @ inv(m) @ r, guaranteed nonnegative.

    Computed as the squared norm of ``solve(L, r)`` so rounding can
    never produce a negative value. A precomputed factor may be passed
    to skip refactorization.
    """
    if lower is None:
        lower = cholesky(m)
    w = solve_triangular(lower, np.asarray(r, dtype=float), lower=True)
    return float(w @ w)


def sample_mvn_zero(
    stream: RngStream,
    m: np.ndarray,
    size: int | None = None,
    lower: np.ndarray | None = None,
) -> np.ndarray:
    """Draw from N(0, m); shape (k,) or (size, k)."""
    if lower is None:
        lower = cholesky(m)
    k = lower.shape[0]
    gen = stream.generator()
    if size is None:
        return lower @ gen.standard_normal(k)
    return gen.standard_normal((int(size), k)) @ lower.T
