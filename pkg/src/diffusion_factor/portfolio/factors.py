"""Statistical factor extraction: PCA, POET and risk-premia PCA."""

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, InvalidInputError
from ..linalg import sym_eigen
from ..panel import as_values


@dataclass(frozen=True)
class FactorExtraction:
    """``projection`` (d x k, orthonormal columns) and the in-sample factor series."""

    projection: np.ndarray
    factors: np.ndarray
    cov: np.ndarray = None


def _checked(panel, k):
    x = as_values(panel)
    n, d = x.shape
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must lie in [1, {d}]")
    if n <= k:
        raise InsufficientDataError(f"need more than k={k} rows, got {n}")
    return x


def _biased_cov(x):
    dev = x - x.mean(axis=0)
    c = dev.T @ dev / x.shape[0]
    return 0.5 * (c + c.T)


def _top(mat, k):
    return sym_eigen(mat).top(k)


def extract_factors_pca(panel, k):
    x = _checked(panel, k)
    basis = _top(_biased_cov(x), k).vectors
    return FactorExtraction(basis, x @ basis)


def poet_covariance(cov, k, n, c_threshold=0.5, floor_rel=1e-8):
    """Top-k spectral part plus hard-thresholded residual, floored to PSD."""
    d = cov.shape[0]
    eig = sym_eigen(cov)
    vals, vecs = eig.values[:k], eig.vectors[:, :k]
    low_rank = (vecs * vals) @ vecs.T
    resid = cov - low_rank
    tau = c_threshold * np.sqrt(np.log(d) / n)
    keep = np.abs(resid) >= tau
    np.fill_diagonal(keep, True)
    est = low_rank + np.where(keep, resid, 0.0)
    est = 0.5 * (est + est.T)
    floor = floor_rel * np.trace(cov) / d
    full = sym_eigen(est)
    if full.values[-1] < floor:
        est = (full.vectors * np.maximum(full.values, floor)) @ full.vectors.T
        est = 0.5 * (est + est.T)
    return est


def extract_factors_poet(panel, k, c_threshold=0.5):
    x = _checked(panel, k)
    cov = poet_covariance(_biased_cov(x), k, x.shape[0], c_threshold)
    basis = _top(cov, k).vectors
    return FactorExtraction(basis, x @ basis, cov)


def rppca_matrix(x, gamma_rp):
    """``(1/n) sum r r^T + gamma r_bar r_bar^T``."""
    n = x.shape[0]
    mean = x.mean(axis=0)
    m = x.T @ x / n + gamma_rp * np.outer(mean, mean)
    return 0.5 * (m + m.T)


def extract_factors_rppca(panel, k, gamma_rp=10.0):
    x = _checked(panel, k)
    basis = _top(rppca_matrix(x, gamma_rp), k).vectors
    return FactorExtraction(basis, x @ basis)


EXTRACTORS = {
    "PCA": extract_factors_pca,
    "POET": extract_factors_poet,
    "RPPCA": extract_factors_rppca,
}
