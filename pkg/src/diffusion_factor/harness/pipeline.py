"""Fit a score network to a return matrix and draw new returns from it.

Data are centered per column and divided by one global scale before
training, and generated samples are mapped back, so the network always
sees returns of roughly unit size regardless of the input units.
"""

from dataclasses import dataclass

import numpy as np

from ..diffusion import DiffusionSchedule
from ..errors import DataError
from ..sampler import SamplerConfig, reverse_sample, seed_key
from ..score_net import forward, init_params
from ..trainer import train


@dataclass
class FittedModel:
    params: object
    sched: DiffusionSchedule
    center: np.ndarray
    scale: float
    result: object = None

    def score(self, r, t):
        return forward(self.params, self.sched, r, t)

    def generate(self, m, seed, steps=200, mode="euler_maruyama"):
        cfg = SamplerConfig(steps=steps, mode=mode, m=m, seed=seed)
        z = reverse_sample(self.score, self.sched, cfg, self.params.d).values
        return self.center + self.scale * z


def schedule_from(cfg):
    return DiffusionSchedule(cfg.schedule.T, cfg.schedule.t0)


def fit_diffusion(values, cfg, k, seed, log_path=None):
    """Train the structured score net on ``values`` (n x d) under ``cfg``."""
    x = np.asarray(values, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise DataError("need at least two rows to fit a diffusion model")
    center = x.mean(axis=0)
    scale = float(np.sqrt(np.mean(x.var(axis=0, ddof=1))))
    if not scale > 0:
        raise DataError("training data have zero variance")
    z = (x - center) / scale
    c_max = cfg.net.c_max if cfg.net.c_max is not None else float(np.max(z.var(axis=0, ddof=1)))
    key = seed_key(seed)
    net = init_params(
        d,
        k,
        np.random.default_rng([*key, 0]),
        hidden=tuple(cfg.net.hidden),
        c_max=c_max,
        time_features=cfg.net.time_features,
        clip=cfg.net.clip,
    )
    sched = schedule_from(cfg)
    tcfg = cfg.train.to_train_config(seed=int(np.random.SeedSequence(key).generate_state(1)[0]), n_rows=n)
    res = train(z, net, tcfg, sched, log_path=log_path)
    res.params.meta.update({"center": center.tolist(), "scale": scale, "seed": key})
    return FittedModel(res.params, sched, center, scale, res)


def fitted_from_checkpoint(params, sched):
    meta = params.meta
    center = np.asarray(meta.get("center", np.zeros(params.d)), dtype=np.float64)
    return FittedModel(params, sched, center, float(meta.get("scale", 1.0)))
