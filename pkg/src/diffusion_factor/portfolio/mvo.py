"""Fully invested mean-variance weights and tangency portfolios.

    maximize  w^T mu - (eta / 2) w^T S w
    s.t.      sum(w) = 1,  and optionally ||w||_inf <= b  or  ||w||_1 <= b.

The constrained problems are solved by projected gradient ascent with
step ``1 / (eta * lambda_max(S))``.  The projection onto the feasible set
is exact (a one-dimensional root search, in the compiled kernel); a
Dykstra alternating-projection variant is available for cross-checking.
"""

from dataclasses import dataclass

import numpy as np

from .._backend import kernels
from ..errors import InfeasibleError, InvalidInputError
from ..linalg import check_symmetric, op_norm, solve_spd

KINDS = {"none": 0, "inf_norm": 1, "l1_norm": 2}


class DegenerateTangencyError(InvalidInputError):
    """``1^T S^-1 mu`` vanishes, so the tangency portfolio is undefined."""


@dataclass(frozen=True)
class Constraint:
    kind: str = "none"
    bound: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown constraint {self.kind!r}")
        if self.kind != "none" and (self.bound is None or not self.bound > 0):
            raise InvalidInputError(f"{self.kind} needs a positive bound")

    def check_feasible(self, d):
        if self.kind == "inf_norm" and d * self.bound < 1.0:
            raise InfeasibleError(f"inf_norm bound {self.bound} needs d * bound >= 1 (d = {d})")
        if self.kind == "l1_norm" and self.bound < 1.0:
            raise InfeasibleError(f"l1_norm bound {self.bound} must be >= 1")


def _parse(constraint):
    if constraint is None:
        return Constraint()
    if isinstance(constraint, Constraint):
        return constraint
    kind, bound = constraint
    return Constraint(kind, float(bound))


def objective(w, mu, cov, eta):
    return float(w @ mu - 0.5 * eta * w @ cov @ w)


def budget_closed_form(mu, cov, eta):
    """Maximizer under the budget constraint alone."""
    ones = np.ones_like(mu)
    x = solve_spd(cov, np.column_stack([mu, ones]))
    a, b = x[:, 0], x[:, 1]
    return a / eta + (1.0 - ones @ a / eta) * b / (ones @ b)


def _ball_proj(x, kind, bound):
    if kind == "inf_norm":
        return np.clip(x, -bound, bound)
    a = np.abs(x)
    if a.sum() <= bound:
        return x
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u * idx > css - bound)[0][-1]
    lam = (css[rho] - bound) / (rho + 1.0)
    return np.sign(x) * np.maximum(a - lam, 0.0)


def dykstra_project(v, kind, bound, tol=1e-14, max_iter=100000):
    """Projection onto the budget hyperplane intersected with the norm ball by Dykstra's algorithm."""
    x = np.asarray(v, dtype=np.float64).copy()
    q = np.zeros_like(x)
    for _ in range(max_iter):
        # the hyperplane step needs no correction term: it is affine
        y = x - (x.sum() - 1.0) / x.size
        x_new = _ball_proj(y + q, kind, bound)
        q = y + q - x_new
        done = np.max(np.abs(x_new - x)) < tol
        x = x_new
        if done:
            break
    return x


def project_feasible(v, constraint):
    c = _parse(constraint)
    v = np.asarray(v, dtype=np.float64)
    if c.kind == "none":
        return v - (v.sum() - 1.0) / v.size
    if c.kind == "inf_norm":
        return kernels.project_box_hyperplane(v, c.bound)
    return kernels.project_l1_hyperplane(v, c.bound)


def _pgd_dykstra(mu, cov, eta, step, c, w0, tol, max_iter):
    w = w0.copy()
    for it in range(1, max_iter + 1):
        x = dykstra_project(w + step * (mu - eta * cov @ w), c.kind, c.bound)
        move = np.linalg.norm(x - w)
        w = x
        if move < tol:
            break
    return w, it


def mean_variance_weights(m, eta, constraint=None, tol=1e-10, max_iter=100000, method="exact"):
    """Mean-variance weights for moments ``m`` (a MomentEstimate or ``(mu, cov)``).

    ``constraint`` is ``None``, a :class:`Constraint`, or a tuple such as
    ``("inf_norm", 0.05)`` / ``("l1_norm", 2.0)``.  ``method="dykstra"``
    uses alternating projections instead of the exact projection.
    """
    mu, cov = (m.mean, m.cov) if hasattr(m, "mean") else m
    mu = np.asarray(mu, dtype=np.float64)
    cov = check_symmetric(cov)
    if cov.shape != (mu.size, mu.size):
        raise InvalidInputError("mean and covariance dimensions differ")
    if not eta > 0:
        raise InvalidInputError("risk aversion must be positive")
    c = _parse(constraint)
    d = mu.size
    c.check_feasible(d)
    w = budget_closed_form(mu, cov, eta)
    if c.kind == "none":
        return w
    if (c.kind == "inf_norm" and np.max(np.abs(w)) <= c.bound) or (
        c.kind == "l1_norm" and np.abs(w).sum() <= c.bound
    ):
        return w
    step = 1.0 / (eta * op_norm(cov))
    w0 = project_feasible(w, c)
    if method == "dykstra":
        w, _ = _pgd_dykstra(mu, cov, eta, step, c, w0, tol, max_iter)
    elif method == "exact":
        w, _ = kernels.pgd_qp(mu, cov, eta, step, KINDS[c.kind], c.bound, w0, tol, max_iter)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return np.asarray(w)


def tangency_weights(mu, cov):
    """Maximum-Sharpe fully invested weights ``S^-1 mu / 1^T S^-1 mu``."""
    mu = np.asarray(mu, dtype=np.float64)
    x = solve_spd(check_symmetric(cov), mu)
    denom = float(x.sum())
    if abs(denom) <= 1e-14 * max(float(np.abs(x).sum()), 1e-300):
        raise DegenerateTangencyError("1^T S^-1 mu is zero")
    return x / denom
