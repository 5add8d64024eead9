"""Synthetic factor-model panels and reverse-SDE sampling.

Reverse sampling integrates

    dR = (R / 2 + score(R, T - tau)) dtau + dW,   R(0) ~ N(0, I),

for ``tau`` in ``[0, T - t0]`` and returns the terminal states.  The
Brownian increments are built coarse-to-fine (Levy construction): the
path for ``N = N0 * 2**L`` steps is the dyadic Brownian-bridge refinement
of the ``N0``-step path, with each level drawn from its own stream.  Runs
with ``N`` and ``2N`` steps and the same seed therefore integrate the same
Brownian path, which makes step-refinement comparisons meaningful.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .diffusion import FactorModelSpec, GaussianLaw
from .errors import InvalidInputError, NumericalAbort
from .panel import ReturnPanel

BLOCK_ROWS = 256
MODES = ("euler_maruyama", "ddpm_footnote")


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 200
    mode: str = "euler_maruyama"
    m: int = 4096
    seed: object = 0  # int or tuple of ints

    def __post_init__(self):
        if self.steps < 2:
            raise InvalidInputError("need at least 2 sampler steps")
        if self.m < 1:
            raise InvalidInputError("need at least one sample")
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown sampler mode {self.mode!r}")


def appendix_d_spec(d, k, seed, sigma_max=0.4):
    """Random Gaussian-factor spec in the style of the synthetic benchmark.

    ``mu_F ~ U(0, 0.1)``, factor sd ``1.5 mu_F``, ``beta_ij ~ N(0, 1)``
    (not orthonormalized) and residual sd ``~ U(0, sigma_max)`` sorted
    descending.
    """
    rng = np.random.default_rng(seed)
    mu_f = rng.uniform(0.0, 0.1, size=k)
    beta = rng.standard_normal((d, k))
    sigma = np.sort(rng.uniform(0.0, sigma_max, size=d))[::-1]
    # U(0, s) can return exactly 0, which the spec forbids
    sigma = np.maximum(sigma, 1e-12)
    return FactorModelSpec(beta, GaussianLaw(mu_f, (1.5 * mu_f) ** 2), sigma, sigma_max)


def simulate_panel(spec, n, seed):
    """``n`` i.i.d. rows of ``R = beta F + eps``; deterministic per seed."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = np.random.default_rng(seed_key(seed))
    f = spec.law.sample(rng, n)
    eps = rng.standard_normal((n, spec.d)) * spec.sigma
    return ReturnPanel(f @ spec.beta.T + eps, meta={"seed": seed_key(seed), "spec_hash": spec_hash(spec)})


def spec_hash(spec):
    h = hashlib.sha256()
    for arr in (spec.beta, spec.sigma, spec.law.first_moment(), spec.law.second_central_moment()):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update(type(spec.law).__name__.encode())
    return h.hexdigest()[:16]


def _odd_part(n):
    levels = 0
    while n % 2 == 0:
        n //= 2
        levels += 1
    return n, levels


def brownian_increments(rng_key, rows, d, steps, dt):
    """Increments ``(steps, rows, d)`` of a Brownian path with step ``dt``.

    ``rng_key`` is a sequence of ints; level ``l`` of the dyadic refinement
    draws from ``default_rng([*rng_key, l])``.
    """
    base, levels = _odd_part(steps)
    coarse_dt = dt * 2**levels
    inc = np.sqrt(coarse_dt) * np.random.default_rng([*rng_key, 0]).standard_normal((base, rows, d))
    width = coarse_dt
    for lvl in range(1, levels + 1):
        z = np.random.default_rng([*rng_key, lvl]).standard_normal(inc.shape)
        # bridge midpoint: mean half the increment, variance width / 4
        first = 0.5 * inc + 0.5 * np.sqrt(width) * z
        out = np.empty((2 * inc.shape[0], rows, d))
        out[0::2] = first
        out[1::2] = inc - first
        inc = out
        width *= 0.5
    return inc


def seed_key(seed):
    """Flatten an int or a sequence of ints into an RNG key list."""
    return [int(x) for x in np.atleast_1d(np.asarray(seed, dtype=np.int64))]


def _check(x, step):
    if not np.all(np.isfinite(x)):
        raise NumericalAbort("score produced non-finite values", step=step)
    return x


def _integrate(score, sched, cfg, r, inc):
    n = cfg.steps
    dt = (sched.T - sched.t0) / n
    times = sched.T - dt * np.arange(n + 1)
    times[-1] = sched.t0
    for j in range(n):
        t = times[j]
        s = _check(np.asarray(score(r, t), dtype=np.float64), j)
        if cfg.mode == "euler_maruyama":
            r = r + (0.5 * r + s) * dt + inc[j]
        else:
            # literal footnote recursion with per-step ratio a = exp(-(t_j - t_{j-1}))
            a = np.exp(-(times[j] - times[j + 1]))
            z = inc[j] / np.sqrt(dt)
            r = (r + (1.0 - a) * s) / np.sqrt(a) + (1.0 - a) / a * z
    return _check(r, n)


def reverse_sample(score, sched, cfg, d):
    """Draw ``cfg.m`` rows from the learned time-``t0`` law.

    ``score(r, t)`` takes an ``(n, d)`` batch and a scalar time.  Rows are
    processed in blocks of ``BLOCK_ROWS`` with streams keyed by
    ``(seed, block)``, so the output does not depend on how blocks are
    scheduled.
    """
    dt = (sched.T - sched.t0) / cfg.steps
    key = seed_key(cfg.seed)
    out = np.empty((cfg.m, d))
    for b, lo in enumerate(range(0, cfg.m, BLOCK_ROWS)):
        rows = min(BLOCK_ROWS, cfg.m - lo)
        r = np.random.default_rng([*key, b, 0]).standard_normal((rows, d))
        inc = brownian_increments([*key, b, 1], rows, d, cfg.steps, dt)
        out[lo : lo + rows] = _integrate(score, sched, cfg, r, inc)
    meta = {"steps": cfg.steps, "mode": cfg.mode, "m": cfg.m, "seed": key, "T": sched.T, "t0": sched.t0}
    return ReturnPanel(out, dates=[f"s{i}" for i in range(cfg.m)], meta=meta)


def write_samples(path, panel, sidecar):
    """Write the panel as CSV plus ``<path>.json`` holding ``sidecar``."""
    panel.to_csv(path, date_header="sample")
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
