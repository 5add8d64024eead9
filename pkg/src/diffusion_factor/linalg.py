"""Dense symmetric linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` values.  The eigensolver is cyclic
Jacobi, run by the compiled kernel when it is available.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DegenerateInputError, InvalidInputError, SingularMatrixError

SYM_RTOL = 1e-12
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues sorted descending with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    def top(self, k):
        return EigenPair(self.values[:k].copy(), self.vectors[:, :k].copy())


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def check_symmetric(a, name="matrix"):
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_RTOL * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return a


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(a):
    """Full eigendecomposition of a symmetric matrix.

    Returns an :class:`EigenPair` with values in descending order.  For
    repeated eigenvalues only the spanned eigenspace is determined.
    """
    a = check_symmetric(a)
    a = 0.5 * (a + a.T)
    tol = JACOBI_RTOL * np.linalg.norm(a)
    values, vectors, _, _ = kernels.jacobi_eigh(a, tol, JACOBI_MAX_SWEEPS)
    order = np.argsort(-values, kind="stable")
    return EigenPair(values[order], fix_signs(vectors[:, order]))


def qr_orthonormalize(a, rtol=1e-10):
    """Orthonormal basis of ``col(a)`` via Householder QR.

    The diagonal of ``R`` is made positive, so a matrix with orthonormal
    columns is returned unchanged.
    """
    a = as_matrix(a)
    n, k = a.shape
    if n < k:
        raise InvalidInputError(f"need rows >= cols, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    diag = np.diag(r)
    scale = np.max(np.abs(diag), initial=0.0)
    if k and (scale == 0.0 or np.min(np.abs(diag)) <= rtol * scale):
        raise DegenerateInputError("matrix is rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs


def qr_with_factor(a, rtol=1e-10):
    """``a = Q @ H`` with orthonormal ``Q`` and upper-triangular ``H``."""
    q = qr_orthonormalize(a, rtol)
    return q, q.T @ np.asarray(a, dtype=np.float64)


def fro_norm(a):
    return float(np.sqrt(np.sum(np.square(np.asarray(a, dtype=np.float64)))))


def op_norm(a):
    """Spectral norm of a symmetric matrix: max |eigenvalue|."""
    return float(np.max(np.abs(sym_eigen(a).values), initial=0.0))


def solve_spd(a, b):
    """Solve ``a x = b`` for symmetric positive definite ``a`` (Cholesky)."""
    a = check_symmetric(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != a.shape[0]:
        raise InvalidInputError("right-hand side has incompatible shape")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    return np.linalg.solve(chol.T, np.linalg.solve(chol, b))


def inv_spd(a):
    return solve_spd(a, np.eye(np.asarray(a).shape[0]))


def sqrtm_psd(a):
    """Symmetric square root of a PSD matrix (negative eigenvalues floored)."""
    eig = sym_eigen(a)
    return (eig.vectors * np.sqrt(np.clip(eig.values, 0.0, None))) @ eig.vectors.T
