"""Linear shrinkage of the mean (Bayes-Stein, OLSE) and covariance (Ledoit-Wolf).

Each estimator takes a :class:`MomentEstimate` and the sample size ``n``
behind it.  The intensity can be forced by keyword; otherwise a default
plug-in estimator is used and clamped to ``[0, 1]``.
"""

import numpy as np

from ..estimation import MomentEstimate
from ..errors import InvalidInputError
from ..linalg import solve_spd


def _clamp01(x):
    return float(min(1.0, max(0.0, x)))


def gmv_mean(mean, cov):
    """``1^T S^-1 mu / 1^T S^-1 1``, the mean return of the minimum-variance portfolio."""
    ones = np.ones_like(mean)
    x = solve_spd(cov, np.column_stack([mean, ones]))
    return float(ones @ x[:, 0] / (ones @ x[:, 1]))


def bayes_stein_intensity(mean, cov, n):
    """``(d + 2) / ((d + 2) + n (mu - mu_g 1)^T S^-1 (mu - mu_g 1))``."""
    d = mean.size
    dev = mean - gmv_mean(mean, cov)
    q = float(dev @ solve_spd(cov, dev))
    return _clamp01((d + 2.0) / ((d + 2.0) + n * q))


def shrink_bayes_stein(m, n, gamma=None):
    """Shrink the mean toward the minimum-variance portfolio's mean; covariance untouched."""
    target = gmv_mean(m.mean, m.cov)
    g = bayes_stein_intensity(m.mean, m.cov, n) if gamma is None else _clamp01(gamma)
    return m.with_mean((1.0 - g) * m.mean + g * target)


def olse_weights(mean, cov, n):
    """Plug-in ``(alpha, beta)`` for ``alpha mu + beta 1`` under quadratic loss.

    The oracle ``alpha = A / (A + tr(S) / n)`` with
    ``A = ||mu - mean(mu) 1||^2`` uses a bias-corrected estimate of ``A``;
    ``beta = (1 - alpha) mean(mu)``.
    """
    d = mean.size
    if d < 2:
        raise InvalidInputError("OLSE needs at least two assets")
    center = float(mean.mean())
    tr = float(np.trace(cov))
    a_hat = float(np.sum((mean - center) ** 2)) - (tr - float(cov.sum()) / d) / n
    a_hat = max(a_hat, 0.0)
    denom = a_hat + tr / n
    alpha = _clamp01(a_hat / denom) if denom > 0 else 0.0
    return alpha, (1.0 - alpha) * center


def shrink_olse(m, n, alpha=None, beta=None):
    if m.d < 2:
        raise InvalidInputError("OLSE needs at least two assets")
    if alpha is None or beta is None:
        a_def, b_def = olse_weights(m.mean, m.cov, n)
        alpha = a_def if alpha is None else alpha
        beta = b_def if beta is None else beta
    return m.with_mean(alpha * m.mean + beta)


def ledoit_wolf_intensity(cov, n, data=None):
    """Identity-target intensity ``b^2 / d^2`` of Ledoit and Wolf (2004).

    With ``data`` (the rows behind ``cov``) the dispersion term ``b^2`` is
    the sample average of ``||x x^T - S||_F^2``; without it a Gaussian
    fourth-moment plug-in ``(||S||_F^2 + tr(S)^2) / n`` is used.
    """
    p = cov.shape[0]
    u = np.trace(cov) / p
    dist = float(np.sum((cov - u * np.eye(p)) ** 2)) / p
    if dist == 0.0:
        return 0.0
    if data is not None:
        x = np.asarray(data, dtype=np.float64)
        x = x - x.mean(axis=0)
        rows = x.shape[0]
        s = x.T @ x / rows
        # ||x x^T - S||^2 = ||x||^4 - 2 x^T S x + ||S||^2
        sq = np.sum(x * x, axis=1)
        quad = np.einsum("ni,ij,nj->n", x, s, x)
        b2 = float(np.sum(sq * sq - 2.0 * quad + np.sum(s * s))) / (rows * rows * p)
    else:
        b2 = (float(np.sum(cov * cov)) + float(np.trace(cov)) ** 2) / (n * p)
    return _clamp01(min(b2, dist) / dist)


def shrink_ledoit_wolf(m, n, gamma=None, data=None):
    """``(1 - g) S + g u I`` with ``u = tr(S) / d``; mean untouched."""
    u = np.trace(m.cov) / m.d
    g = ledoit_wolf_intensity(m.cov, n, data) if gamma is None else _clamp01(gamma)
    cov = (1.0 - g) * m.cov + g * u * np.eye(m.d)
    return m.with_cov(0.5 * (cov + cov.T))


__all__ = [
    "MomentEstimate",
    "bayes_stein_intensity",
    "gmv_mean",
    "ledoit_wolf_intensity",
    "olse_weights",
    "shrink_bayes_stein",
    "shrink_ledoit_wolf",
    "shrink_olse",
]
