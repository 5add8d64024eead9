"""Shared constructors and oracles for the test suite."""

import itertools

import numpy as np

from diffusion_factor import _kernels_py
from diffusion_factor.diffusion import FactorModelSpec, GaussianLaw, MixtureLaw, gaussian_score_oracle
from diffusion_factor.score_net import init_params, loss_and_grad, param_arrays

try:
    from diffusion_factor import _kernels as _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None

KERNEL_BACKENDS = [_kernels_py] + ([_kernels_cy] if _kernels_cy is not None else [])
KERNEL_IDS = [m.BACKEND for m in KERNEL_BACKENDS]


def random_spd(rng, n, floor=0.1):
    x = rng.standard_normal((2 * n, n))
    return x.T @ x / (2 * n) + floor * np.eye(n)


def random_orthonormal(rng, d, k):
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return q


def random_gaussian_spec(rng, d, k, orthonormal=True):
    """Gaussian-factor model with a diagonal factor covariance."""
    beta = random_orthonormal(rng, d, k) if orthonormal else rng.standard_normal((d, k))
    law = GaussianLaw(rng.normal(0.0, 0.3, k), rng.uniform(0.3, 2.0, k))
    sigma = np.sort(rng.uniform(0.2, 0.8, d))[::-1]
    return FactorModelSpec(beta, law, sigma)


def random_mixture_spec(rng, d, k, atoms=2):
    beta = random_orthonormal(rng, d, k)
    w = rng.dirichlet(np.ones(atoms))
    law = MixtureLaw(w, rng.normal(0.0, 1.0, (atoms, k)), rng.uniform(0.05, 0.5, (atoms, k)))
    sigma = np.sort(rng.uniform(0.2, 0.8, d))[::-1]
    return FactorModelSpec(beta, law, sigma)


def well_conditioned_spec(rng, d=8, k=2):
    """Factor model whose smallest population variance stays well above the
    sampler step size, so Euler-Maruyama is not stiff."""
    beta = random_orthonormal(rng, d, k)
    law = GaussianLaw(rng.normal(0.0, 0.2, k), rng.uniform(0.2, 1.0, k))
    sigma = np.sort(rng.uniform(0.2, 0.6, d))[::-1]
    return FactorModelSpec(beta, law, sigma)


def trapezoid_xi(weights, means, variances, y, alpha, gamma, nodes=10_000):
    """Brute-force posterior factor mean for a 1-d Gaussian mixture prior.

    Integrates ``f * phi(y; alpha f, gamma) p(f)`` over a uniform grid.
    """
    sd = np.sqrt(variances)
    lo = np.min(means - 12 * sd)
    hi = np.max(means + 12 * sd)
    f = np.linspace(lo, hi, nodes)
    prior = sum(
        w * np.exp(-0.5 * (f - m) ** 2 / v) / np.sqrt(2 * np.pi * v)
        for w, m, v in zip(weights, means, variances)
    )
    kernel = np.exp(-0.5 * (y - alpha * f) ** 2 / gamma)
    dens = kernel * prior
    return np.trapezoid(f * dens, f) / np.trapezoid(dens, f)


def rel_fro(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def fd_relative_errors(params, sched, r, t, target, weights=None, step=1e-5, floor=1e-8):
    """Per-array ``||analytic - central FD|| / max(||FD||, floor)``."""
    _, grads = loss_and_grad(params, sched, r, t, target, weights)
    errors = []
    for arr, g in zip(param_arrays(params), grads.arrays()):
        fd = np.empty_like(arr)
        flat, fdf = arr.reshape(-1), fd.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up, _ = loss_and_grad(params, sched, r, t, target, weights)
            flat[i] = keep - step
            down, _ = loss_and_grad(params, sched, r, t, target, weights)
            flat[i] = keep
            fdf[i] = (up - down) / (2 * step)
        errors.append(float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), floor)))
    return errors


def random_small_net(rng, d=6, k=2, hidden=(5, 4), **kw):
    """Small net with random ``c`` and biases so no unit sits at a ReLU kink."""
    p = init_params(d, k, rng, hidden=hidden, c_max=2.0, **kw)
    p.c = rng.uniform(0.1, 1.9, d)
    for b in p.mlp.biases:
        b[:] = rng.normal(0.0, 0.3, b.shape)
    return p


def score_error_ratio(score, spec, sched, rng, n=4000, grid=20):
    """Time-averaged ``E||score - oracle||^2 / E||oracle||^2`` on fresh draws
    from the noised law, over a geometric time grid."""
    num = den = 0.0
    for t in sched.time_grid(grid):
        r0 = spec.law.sample(rng, n) @ spec.beta.T + rng.standard_normal((n, spec.d)) * spec.sigma
        r_t = sched.alpha(t) * r0 + np.sqrt(sched.h(t)) * rng.standard_normal(r0.shape)
        oracle = gaussian_score_oracle(spec, sched, t, r_t)
        num += np.mean(np.sum((score(r_t, t) - oracle) ** 2, axis=1))
        den += np.mean(np.sum(oracle**2, axis=1))
    return float(num / den)


def _eq_qp(mu, cov, eta, a, c):
    """Maximize ``w.mu - eta/2 w.S.w`` subject to ``A w = c`` via the KKT system."""
    d, m = mu.size, a.shape[0]
    kkt = np.block([[eta * cov, a.T], [a, np.zeros((m, m))]])
    sol, *_ = np.linalg.lstsq(kkt, np.concatenate([mu, c]), rcond=None)
    w = sol[:d]
    return w if np.allclose(a @ w, c, atol=1e-9) else None


def brute_force_qp(mu, cov, eta, kind="none", bound=None):
    """Exact small-d oracle: enumerate every active set (box) or sign pattern
    (l1), solve the equality-constrained KKT system, keep the best feasible."""
    d = mu.size
    ones = np.ones((1, d))
    best, best_w = -np.inf, None

    def consider(w):
        nonlocal best, best_w
        if w is None or abs(w.sum() - 1.0) > 1e-9:
            return
        if kind == "inf_norm" and np.max(np.abs(w)) > bound + 1e-9:
            return
        if kind == "l1_norm" and np.abs(w).sum() > bound + 1e-9:
            return
        val = w @ mu - 0.5 * eta * w @ cov @ w
        if val > best:
            best, best_w = val, w

    consider(_eq_qp(mu, cov, eta, ones, np.ones(1)))
    if kind == "inf_norm":
        for status in itertools.product((0, 1, -1), repeat=d):
            fixed = [i for i in range(d) if status[i]]
            if not fixed:
                continue
            a = np.vstack([ones, np.eye(d)[fixed]])
            c = np.concatenate([[1.0], [status[i] * bound for i in fixed]])
            consider(_eq_qp(mu, cov, eta, a, c))
    elif kind == "l1_norm":
        for signs in itertools.product((0, 1, -1), repeat=d):
            s = np.array(signs, dtype=float)
            zero = [i for i in range(d) if s[i] == 0]
            a = np.vstack([ones, s[None, :], np.eye(d)[zero]])
            c = np.concatenate([[1.0, bound], np.zeros(len(zero))])
            w = _eq_qp(mu, cov, eta, a, c)
            if w is not None and np.all(w * s >= -1e-12):
                consider(w)
    return best_w, best


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Log one acceptance line; the conftest prints them after the run."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok

