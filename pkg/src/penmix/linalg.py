"""Small dense SPD matrix kernels and the multivariate normal log-density.

All routines work on float64 arrays of modest dimension (d <= 10).
Covariances are factored by Cholesky; inverses are never formed explicitly.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import DimensionMismatch, NotPositiveDefinite

LOG_2PI = float(np.log(2.0 * np.pi))


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric matrix obtained by mirroring the lower triangle.

    Canonicalizing through the lower triangle removes the tiny asymmetries
    that accumulate from floating-point updates of symmetric matrices.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    lower = np.tril(a)
    return lower + np.tril(a, -1).T


def cholesky_lower(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with m = L @ L.T.

    Only the lower triangle of ``m`` is read.  Raises
    :class:`NotPositiveDefinite` when a pivot is not strictly positive,
    which is how degenerate covariance matrices announce themselves.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def log_det(m: np.ndarray) -> float:
    """log-determinant of an SPD matrix via its Cholesky factor."""
    L = cholesky_lower(m)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _check_vector(x: np.ndarray, d: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatch(f"{name} has shape {x.shape}, expected ({d},)")
    return x


def mahalanobis_sq(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Squared Mahalanobis distance (x - mu)' sigma^{-1} (x - mu).

    Computed through a triangular solve against the Cholesky factor, so the
    result is nonnegative by construction.
    """
    L = cholesky_lower(sigma)
    d = L.shape[0]
    x = _check_vector(x, d, "x")
    mu = _check_vector(mu, d, "mu")
    z = solve_triangular(L, x - mu, lower=True, check_finite=False)
    return float(z @ z)


def mvn_logpdf(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Log-density of N(mu, sigma) at x.

    Uses the standard normalization (2*pi)^{-d/2} |sigma|^{-1/2}.
    """
    L = cholesky_lower(sigma)
    d = L.shape[0]
    x = _check_vector(x, d, "x")
    mu = _check_vector(mu, d, "mu")
    z = solve_triangular(L, x - mu, lower=True, check_finite=False)
    half_log_det = float(np.sum(np.log(np.diag(L))))
    return -0.5 * d * LOG_2PI - half_log_det - 0.5 * float(z @ z)


def mahalanobis_sq_rows(data: np.ndarray, mu: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Row-wise squared Mahalanobis distances given a precomputed factor L."""
    # L^{-1} is a (d, d) solve; the per-row work is then a single matmul.
    L_inv = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    z = (data - mu) @ L_inv.T
    return np.einsum("ij,ij->i", z, z)


def min_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(m)[0])
