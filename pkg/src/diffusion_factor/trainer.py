"""Denoising score matching with Adam and constraint projection."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalAbort
from .panel import as_values
from .score_net import loss_and_grad, param_arrays, project_constraints


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    m_noise: int = 1
    weighting: str = "uniform"  # or "h_scaled"
    seed: int = 0
    patience: int = 0
    heldout_frac: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.epochs < 0 or self.m_noise < 1:
            raise InvalidInputError("epochs must be >= 0 and m_noise >= 1")
        if self.weighting not in ("uniform", "h_scaled"):
            raise InvalidInputError(f"unknown loss weighting {self.weighting!r}")
        if not 0.0 < self.heldout_frac < 1.0:
            raise InvalidInputError("heldout_frac must lie in (0, 1)")


@dataclass
class TrainResult:
    params: object
    train_loss: list = field(default_factory=list)
    heldout_loss: list = field(default_factory=list)
    log: list = field(default_factory=list)
    best_epoch: int = None


def make_training_pair(r0, sched, rng, eps=None, t=None):
    """Draw ``t ~ U[t0, T]`` and noise; return ``(t, r_t, target)``.

    ``r0`` may be one row or a batch; ``eps`` and ``t`` override the draws.
    """
    r0 = np.asarray(r0, dtype=np.float64)
    batch = np.atleast_2d(r0)
    n = batch.shape[0]
    if t is None:
        t = rng.uniform(sched.t0, sched.T, size=n)
    else:
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,)).copy()
        sched.alpha(t)  # range check
    if eps is None:
        eps = rng.standard_normal(batch.shape)
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), batch.shape)
    a = np.exp(-0.5 * t)[:, None]
    sh = np.sqrt(-np.expm1(-t))[:, None]
    r_t = a * batch + sh * eps
    target = -eps / sh
    if r0.ndim == 1:
        return float(t[0]), r_t[0], target[0]
    return t, r_t, target


def _loss_weights(cfg, t):
    return None if cfg.weighting == "uniform" else -np.expm1(-t)


def _batch(rows, sched, rng, cfg):
    if cfg.m_noise > 1:
        rows = np.repeat(rows, cfg.m_noise, axis=0)
    t, r_t, target = make_training_pair(rows, sched, rng)
    return t, r_t, target, _loss_weights(cfg, t)


def heldout_loss(params, values, sched, cfg, key):
    """Deterministic held-out loss with noise keyed by ``key``."""
    rng = np.random.default_rng(key)
    t, r_t, target, w = _batch(values, sched, rng, cfg)
    loss, _ = loss_and_grad(params, sched, r_t, t, target, w)
    return loss


def train(panel, net, cfg, sched, log_path=None):
    """Fit ``net`` to the rows of ``panel``; returns a :class:`TrainResult`.

    Epoch ``e`` shuffles with ``default_rng([seed, e])`` and batch ``b``
    draws its noise from ``default_rng([seed, e, b])``, so a run is
    reproducible bit for bit.
    """
    values = as_values(panel)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("training panel contains missing values")
    if values.shape[1] != net.d:
        raise InvalidInputError("panel width does not match the network")
    if cfg.patience > 0:
        n_hold = max(1, int(round(cfg.heldout_frac * values.shape[0])))
        fit, hold = values[:-n_hold], values[-n_hold:]
    else:
        fit, hold = values, None
    if fit.shape[0] < cfg.batch_size:
        raise InvalidInputError(f"need at least batch_size={cfg.batch_size} rows, got {fit.shape[0]}")

    params = net.copy()
    result = TrainResult(params)
    moments = [(np.zeros_like(a), np.zeros_like(a)) for a in param_arrays(params)]
    step = 0
    best, best_params, stale = np.inf, params, 0
    n = fit.shape[0]
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        total, count, gnorm = 0.0, 0, 0.0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            rng = np.random.default_rng([cfg.seed, epoch, b])
            t, r_t, target, w = _batch(fit[order[lo : lo + cfg.batch_size]], sched, rng, cfg)
            loss, grads = loss_and_grad(params, sched, r_t, t, target, w)
            if not np.isfinite(loss):
                norms = {"c": float(np.linalg.norm(params.c)), "V": float(np.linalg.norm(params.V))}
                raise NumericalAbort("non-finite training loss", epoch=epoch, batch=b, **norms)
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for arr, g, (m, v) in zip(param_arrays(params), grads.arrays(), moments):
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                arr -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
            params = project_constraints(params)
            total += loss * t.size
            count += t.size
            gnorm = grads.norm()
        epoch_loss = total / count
        result.train_loss.append(epoch_loss)
        held = np.nan
        if hold is not None:
            held = heldout_loss(params, hold, sched, cfg, [cfg.seed, epoch, 2**31 - 1])
            result.heldout_loss.append(held)
        result.log.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "heldout_loss": held,
                "grad_norm": gnorm,
                "wall_ms": 1e3 * (time.perf_counter() - start),
            }
        )
        if hold is not None:
            if held < best:
                best, best_params, stale = held, params, 0
                result.best_epoch = epoch
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    result.params = best_params if hold is not None and np.isfinite(best) else params
    if log_path is not None:
        write_log(log_path, result.log)
    return result


def write_log(path, rows):
    cols = ["epoch", "train_loss", "heldout_loss", "grad_norm", "wall_ms"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] if c == "epoch" else repr(float(row[c])) for c in cols])
