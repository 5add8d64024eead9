"""Sample moments, top-k spectral subspaces and relative-error metrics."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .linalg import check_symmetric, fro_norm, sym_eigen
from .panel import as_values

SOURCES = ("real_emp", "diff_emp", "oracle")


class DivisionDegenerateError(InvalidInputError):
    """A relative-error denominator is zero."""


@dataclass(frozen=True)
class MomentEstimate:
    mean: np.ndarray
    cov: np.ndarray
    source: str = "real_emp"
    n_used: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise InvalidInputError("covariance must be d x d for a d-vector mean")
        check_symmetric(cov)
        if np.any(np.diag(cov) < 0):
            raise InvalidInputError("covariance diagonal must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self):
        return self.mean.size

    def with_mean(self, mean, source=None):
        return MomentEstimate(mean, self.cov, source or self.source, self.n_used)

    def with_cov(self, cov, source=None):
        return MomentEstimate(self.mean, cov, source or self.source, self.n_used)


@dataclass(frozen=True)
class SubspaceEstimate:
    eigenvalues: np.ndarray
    basis: np.ndarray

    @property
    def projector(self):
        return self.basis @ self.basis.T


def sample_moments(panel, source="real_emp"):
    """Row mean and the unbiased (``1/(m-1)``) covariance."""
    x = as_values(panel)
    m = x.shape[0]
    if m < 2:
        raise InsufficientDataError(f"need at least 2 rows, got {m}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("panel contains missing values")
    mean = x.mean(axis=0)
    dev = x - mean
    cov = dev.T @ dev / (m - 1)
    return MomentEstimate(mean, 0.5 * (cov + cov.T), source, m)


def top_k_subspace(est, k):
    cov = est.cov if isinstance(est, MomentEstimate) else np.asarray(est)
    d = cov.shape[0]
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must lie in [1, {d}], got {k}")
    top = sym_eigen(cov).top(k)
    return SubspaceEstimate(top.values, top.vectors)


def eigen_gap(est, k):
    cov = est.cov if isinstance(est, MomentEstimate) else np.asarray(est)
    if not 1 <= k < cov.shape[0]:
        raise InvalidInputError("eigen_gap needs 1 <= k < d")
    vals = sym_eigen(cov).values
    return float(vals[k - 1] - vals[k])


def _nonzero(x, what):
    if x == 0.0:
        raise DivisionDegenerateError(f"{what} is zero")
    return x


def re_eigen(est_vals, true_vals):
    """Mean absolute relative error of the top-k eigenvalues."""
    est_vals = np.asarray(est_vals, dtype=np.float64)
    true_vals = np.asarray(true_vals, dtype=np.float64)
    if est_vals.shape != true_vals.shape:
        raise InvalidInputError("eigenvalue vectors differ in length")
    if np.any(true_vals == 0):
        raise DivisionDegenerateError("true eigenvalue is zero")
    return float(np.mean(np.abs(est_vals / true_vals - 1.0)))


def re_subspace(est_basis, true_basis):
    """``||U^ U^T - U U^T||_F / sqrt(k)``; depends only on the projectors."""
    est_basis = np.asarray(est_basis, dtype=np.float64)
    true_basis = np.asarray(true_basis, dtype=np.float64)
    if est_basis.shape != true_basis.shape:
        raise InvalidInputError("bases differ in shape")
    k = true_basis.shape[1]
    diff = est_basis @ est_basis.T - true_basis @ true_basis.T
    return fro_norm(diff) / _nonzero(np.sqrt(k), "subspace dimension")


def re_mean(est, true):
    est, true = np.asarray(est, dtype=np.float64), np.asarray(true, dtype=np.float64)
    return float(np.linalg.norm(est - true) / _nonzero(float(np.linalg.norm(true)), "true mean"))


def re_cov(est, true):
    est, true = np.asarray(est, dtype=np.float64), np.asarray(true, dtype=np.float64)
    return fro_norm(est - true) / _nonzero(fro_norm(true), "true covariance")


def all_metrics(est, truth, k):
    """The four relative errors of ``est`` against the ``truth`` moments.

    Returns a dict keyed ``RE1`` (eigenvalues), ``RE2`` (subspace), ``RE3``
    (mean), ``RE4`` (covariance).
    """
    sub_e = top_k_subspace(est, k)
    sub_t = top_k_subspace(truth, k)
    return {
        "RE1": re_eigen(sub_e.eigenvalues, sub_t.eigenvalues),
        "RE2": re_subspace(sub_e.basis, sub_t.basis),
        "RE3": re_mean(est.mean, truth.mean),
        "RE4": re_cov(est.cov, truth.cov),
    }


METRIC_COLUMNS = ["N", "metric", "diff_value", "emp_value", "ratio", "seed"]


def write_metrics_csv(path, rows):
    """Rows are dicts with :data:`METRIC_COLUMNS` keys."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x
