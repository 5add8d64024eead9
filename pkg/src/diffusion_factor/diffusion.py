"""Forward-process schedule, factor-model geometry and exact scores.

The forward process is the Ornstein-Uhlenbeck SDE with unit weight, so
``alpha(t) = exp(-t/2)`` and ``h(t) = 1 - alpha(t)**2``.  For a factor
model ``R = beta F + eps`` with orthonormal loadings the score of the
noised law splits into a k-dimensional nonlinear part (through the
posterior factor mean ``xi``) and a linear complement; see
:func:`score_decomposed` and :func:`score_rearranged`.

Arrays of returns are ``(n, d)``; a single ``(d,)`` vector is accepted
wherever a batch is, and the result has the matching shape.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    InvalidInputError,
    NumericalUnderflowError,
    RangeError,
    SingularMatrixError,
    UnsupportedLawError,
)
from .linalg import inv_spd, qr_with_factor

ORTHONORMAL_ATOL = 1e-10


@dataclass(frozen=True)
class DiffusionSchedule:
    """Time horizon ``T`` and early-stopping time ``t0`` of the OU process."""

    T: float = 5.0
    t0: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.t0 < self.T) or not np.isfinite(self.T):
            raise InvalidInputError(f"need 0 < t0 < T, got t0={self.t0}, T={self.T}")

    def _check(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > self.T * (1 + 1e-12)) or not np.all(np.isfinite(t)):
            raise RangeError(f"time outside [0, {self.T}]: {t}")
        return t

    def alpha(self, t):
        t = self._check(t)
        out = np.exp(-0.5 * t)
        return float(out) if out.ndim == 0 else out

    def h(self, t):
        t = self._check(t)
        out = -np.expm1(-t)
        return float(out) if out.ndim == 0 else out

    def time_grid(self, n=20):
        """Geometric grid of ``n`` times from ``t0`` to ``T``."""
        return np.geomspace(self.t0, self.T, n)


# -- factor laws ------------------------------------------------------------


def _as_batch(x, width, name):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != width:
        raise InvalidInputError(f"{name} must have trailing dimension {width}, got {x.shape}")
    return x2, single


def _restore(x, single):
    return x[0] if single else x


@dataclass(frozen=True)
class GaussianLaw:
    """``F ~ N(mean, cov)``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (mean.size, mean.size):
            raise InvalidInputError("covariance shape does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def k(self):
        return self.mean.size

    def first_moment(self):
        return self.mean.copy()

    def second_central_moment(self):
        return self.cov.copy()

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.k))
        if np.count_nonzero(self.cov - np.diag(np.diag(self.cov))) == 0:
            return self.mean + z * np.sqrt(np.diag(self.cov))
        return self.mean + z @ np.linalg.cholesky(self.cov).T

    def transformed(self, h):
        h = np.asarray(h, dtype=np.float64)
        return GaussianLaw(h @ self.mean, h @ self.cov @ h.T)

    def posterior_mean(self, y, alpha, gamma):
        # E[F | alpha F + N(0, gamma) = y]
        gain = alpha * self.cov @ inv_spd(alpha**2 * self.cov + gamma)
        return self.mean + (y - alpha * self.mean) @ gain.T


@dataclass(frozen=True)
class MixtureLaw:
    """Finite Gaussian mixture; a zero covariance makes an atom a point mass."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        c = np.asarray(self.covs, dtype=np.float64)
        if m.shape[0] != w.size:
            m = m.T if m.shape[1] == w.size and m.shape[0] != w.size else m
        if m.shape[0] != w.size:
            raise InvalidInputError("one mean per mixture weight required")
        k = m.shape[1]
        if c.ndim == 2 and c.shape == (w.size, k):
            c = np.stack([np.diag(row) for row in c])
        if c.shape != (w.size, k, k):
            raise InvalidInputError(f"mixture covariances must be ({w.size}, {k}, {k})")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise InvalidInputError("mixture weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    @property
    def k(self):
        return self.means.shape[1]

    def first_moment(self):
        return self.weights @ self.means

    def second_central_moment(self):
        mu = self.first_moment()
        dev = self.means - mu
        within = np.einsum("j,jab->ab", self.weights, self.covs)
        return within + (dev.T * self.weights) @ dev

    def sample(self, rng, n):
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        z = rng.standard_normal((n, self.k))
        out = self.means[comp].copy()
        for j in range(self.weights.size):
            sel = comp == j
            if np.any(self.covs[j]):
                out[sel] += z[sel] @ np.linalg.cholesky(self.covs[j]).T
        return out

    def transformed(self, h):
        h = np.asarray(h, dtype=np.float64)
        return MixtureLaw(
            self.weights, self.means @ h.T, np.einsum("ab,jbc,dc->jad", h, self.covs, h)
        )

    def posterior_mean(self, y, alpha, gamma):
        n = y.shape[0]
        logw = np.empty((n, self.weights.size))
        comp_means = np.empty((self.weights.size, n, self.k))
        for j, (wj, mj, sj) in enumerate(zip(self.weights, self.means, self.covs)):
            cov = alpha**2 * sj + gamma
            prec = inv_spd(cov)
            _, logdet = np.linalg.slogdet(cov)
            dev = y - alpha * mj
            maha = np.einsum("na,ab,nb->n", dev, prec, dev)
            with np.errstate(divide="ignore"):
                logw[:, j] = np.log(wj) - 0.5 * logdet - 0.5 * maha
            comp_means[j] = mj + dev @ (alpha * sj @ prec).T
        top = np.max(logw, axis=1, keepdims=True)
        if not np.all(np.isfinite(top)):
            raise NumericalUnderflowError("all mixture kernel weights vanished")
        post = np.exp(logw - top)
        post /= post.sum(axis=1, keepdims=True)
        return np.einsum("nj,jna->na", post, comp_means)


@dataclass(frozen=True)
class PointMass:
    """Degenerate factor law concentrated at ``f0``."""

    f0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f0", np.atleast_1d(np.asarray(self.f0, dtype=np.float64)))

    @property
    def k(self):
        return self.f0.size

    def first_moment(self):
        return self.f0.copy()

    def second_central_moment(self):
        return np.zeros((self.k, self.k))

    def sample(self, rng, n):
        return np.tile(self.f0, (n, 1))

    def transformed(self, h):
        return PointMass(np.asarray(h, dtype=np.float64) @ self.f0)

    def posterior_mean(self, y, alpha, gamma):
        return np.tile(self.f0, (y.shape[0], 1))


# -- factor model -----------------------------------------------------------


@dataclass(frozen=True)
class FactorModelSpec:
    """Ground-truth factor model ``R = beta F + eps``, ``eps ~ N(0, diag(sigma^2))``.

    ``sigma`` must be positive, sorted descending and bounded by
    ``sigma_max``.  ``orthonormal_beta`` records whether ``beta`` has
    orthonormal columns; the score machinery requires it and
    :meth:`orthonormalized` produces an equivalent spec that has it.
    """

    beta: np.ndarray
    law: object
    sigma: np.ndarray
    sigma_max: float = None
    orthonormal_beta: bool = field(default=None)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if beta.ndim != 2:
            raise InvalidInputError("beta must be a d x k matrix")
        d, k = beta.shape
        if not k < d:
            raise InvalidInputError(f"need k < d, got d={d}, k={k}")
        if sigma.shape != (d,):
            raise InvalidInputError("sigma must have one entry per asset")
        if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
            raise InvalidInputError("residual standard deviations must be positive")
        if np.any(np.diff(sigma) > 0):
            raise InvalidInputError("sigma must be sorted in descending order")
        sigma_max = float(sigma.max()) if self.sigma_max is None else float(self.sigma_max)
        if sigma_max < sigma.max():
            raise InvalidInputError("sigma_max must bound every residual sd")
        if self.law.k != k:
            raise InvalidInputError("factor law dimension does not match beta")
        ortho = np.allclose(beta.T @ beta, np.eye(k), atol=ORTHONORMAL_ATOL, rtol=0)
        if self.orthonormal_beta and not ortho:
            raise InvalidInputError("beta flagged orthonormal but beta^T beta != I")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sigma_max", sigma_max)
        object.__setattr__(self, "orthonormal_beta", bool(ortho))

    @property
    def d(self):
        return self.beta.shape[0]

    @property
    def k(self):
        return self.beta.shape[1]

    def mean(self):
        return self.beta @ self.law.first_moment()

    def covariance(self):
        """Population covariance ``beta Sigma_F beta^T + diag(sigma^2)``."""
        return self.beta @ self.law.second_central_moment() @ self.beta.T + np.diag(self.sigma**2)

    def orthonormalized(self):
        """Equivalent spec with ``beta = Q``, factors mapped through ``H``."""
        if self.orthonormal_beta:
            return self
        q, h = qr_with_factor(self.beta)
        return replace(self, beta=q, law=self.law.transformed(h), orthonormal_beta=True)


@dataclass(frozen=True)
class ProjectionBundle:
    """Time-``t`` geometry: ``Lambda_t`` (diagonal), ``Gamma_t`` and projector ``T_t``."""

    t: float
    alpha: float
    h: float
    lambda_diag: np.ndarray
    gamma: np.ndarray
    proj: np.ndarray

    @property
    def lambda_t(self):
        return np.diag(self.lambda_diag)


def projection_bundle(spec, sched, t):
    if not spec.orthonormal_beta:
        raise InvalidInputError("beta must have orthonormal columns; use spec.orthonormalized()")
    a, h = sched.alpha(t), sched.h(t)
    lam = h + spec.sigma**2 * a**2
    if np.any(lam <= 0):
        raise SingularMatrixError(f"Lambda_t is singular at t={t}")
    beta = spec.beta
    gamma = inv_spd(beta.T @ (beta / lam[:, None]))
    scaled = beta / np.sqrt(lam)[:, None]
    proj = scaled @ gamma @ scaled.T
    return ProjectionBundle(float(t), a, h, lam, gamma, 0.5 * (proj + proj.T))


def xi_quadrature(law, gamma_t, alpha_t, z):
    """Posterior factor mean ``xi(z, t)``, with the kernel evaluated at ``Gamma_t z``.

    Exact for point masses, Gaussians and finite mixtures.
    """
    z2, single = _as_batch(z, law.k, "z")
    y = z2 @ np.asarray(gamma_t).T
    return _restore(law.posterior_mean(y, float(alpha_t), np.asarray(gamma_t)), single)


def _default_xi(spec, bundle):
    return lambda z, t: xi_quadrature(spec.law, bundle.gamma, bundle.alpha, z)


def score_rearranged(spec, sched, t, r, xi_eval=None):
    """``alpha Lambda^-1 beta xi(beta^T Lambda^-1 r, t) - Lambda^-1 r``."""
    b = projection_bundle(spec, sched, t)
    xi_eval = xi_eval or _default_xi(spec, b)
    r2, single = _as_batch(r, spec.d, "r")
    scaled = r2 / b.lambda_diag
    xi = np.asarray(xi_eval(scaled @ spec.beta, t)).reshape(r2.shape[0], spec.k)
    return _restore(b.alpha * (xi @ spec.beta.T) / b.lambda_diag - scaled, single)


def subspace_score(spec, bundle, y, xi_eval):
    """Subspace component as a function of the latent coordinate ``y``.

    Uses ``grad log p_fac(y) = Gamma^-1 (alpha xi(Gamma^-1 y) - y)`` mapped
    to asset space by ``Lambda^-1 beta Gamma``.
    """
    gamma_inv = inv_spd(bundle.gamma)
    z = y @ gamma_inv.T
    xi = np.asarray(xi_eval(z, bundle.t)).reshape(y.shape)
    grad_fac = (bundle.alpha * xi - y) @ gamma_inv.T
    lift = (spec.beta / bundle.lambda_diag[:, None]) @ bundle.gamma
    return grad_fac @ lift.T


def complement_score(bundle, r):
    """``-Lambda^-1/2 (I - T) Lambda^-1/2 r``."""
    root = np.sqrt(bundle.lambda_diag)
    x = r / root
    return -(x - x @ bundle.proj) / root


def score_decomposed(spec, sched, t, r, xi_eval=None):
    """Score of the noised factor model as subspace + complement components."""
    if float(t) <= 0.0:
        raise RangeError("score requires t > 0")
    b = projection_bundle(spec, sched, t)
    xi_eval = xi_eval or _default_xi(spec, b)
    r2, single = _as_batch(r, spec.d, "r")
    root = np.sqrt(b.lambda_diag)
    # latent coordinate beta^T Lambda^1/2 T Lambda^-1/2 r
    y = ((r2 / root) @ b.proj * root) @ spec.beta
    return _restore(subspace_score(spec, b, y, xi_eval) + complement_score(b, r2), single)


def marginal_covariance(spec, sched, t):
    return sched.alpha(t) ** 2 * spec.covariance() + sched.h(t) * np.eye(spec.d)


def marginal_mean(spec, sched, t):
    return sched.alpha(t) * spec.mean()


def gaussian_score_oracle(spec, sched, t, r):
    """Closed-form score ``-(alpha^2 Sigma0 + h I)^-1 (r - alpha mu0)`` for Gaussian factors."""
    if not isinstance(spec.law, GaussianLaw):
        raise UnsupportedLawError("closed-form score needs a Gaussian factor law")
    r2, single = _as_batch(r, spec.d, "r")
    prec = inv_spd(marginal_covariance(spec, sched, t))
    return _restore(-(r2 - marginal_mean(spec, sched, t)) @ prec, single)


def gaussian_score_fn(spec, sched):
    """Vectorized ``score(r, t)`` callable for a Gaussian-factor spec."""
    if not isinstance(spec.law, GaussianLaw):
        raise UnsupportedLawError("closed-form score needs a Gaussian factor law")
    cov0, mu0 = spec.covariance(), spec.mean()
    eye = np.eye(spec.d)

    def score(r, t):
        a, h = sched.alpha(t), sched.h(t)
        return -(r - a * mu0) @ inv_spd(a * a * cov0 + h * eye)

    return score
