"""Factor-structured score network.

    s(r, t) = alpha_t D_t V g(V^T D_t r, t) - D_t r,
    D_t = diag(1 / (h_t + alpha_t^2 c_i)),

with ``V`` a d x k matrix with orthonormal columns, ``c`` a variance-like
per-asset vector in ``[0, c_max]`` and ``g`` a ReLU MLP from ``k + 1``
(latent code plus ``t / T``) to ``k`` outputs.  Gradients are computed by
hand in :func:`loss_and_grad`.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .linalg import qr_orthonormalize

CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """Dense layers ``(W, b)`` with ``W`` of shape ``(out, in)``."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidInputError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidInputError(f"layer {i}: bias does not match weight rows")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise InvalidInputError(f"layer {i}: width does not chain")

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class ScoreNetParams:
    c: np.ndarray
    V: np.ndarray
    mlp: MlpParams
    c_max: float
    time_features: str = "t"  # "t" or "t_alpha_h"
    clip: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        d, k = self.V.shape
        if self.c.shape != (d,):
            raise InvalidInputError("c must have one entry per row of V")
        if self.time_features not in ("t", "t_alpha_h"):
            raise InvalidInputError(f"unknown time featurization {self.time_features!r}")
        if self.mlp.in_dim != k + _n_time_features(self.time_features) or self.mlp.out_dim != k:
            raise InvalidInputError("MLP widths do not match the latent dimension")

    @property
    def d(self):
        return self.V.shape[0]

    @property
    def k(self):
        return self.V.shape[1]

    def copy(self):
        return replace(self, c=self.c.copy(), V=self.V.copy(), mlp=self.mlp.copy(), meta=dict(self.meta))


@dataclass
class ScoreNetGrads:
    c: np.ndarray
    V: np.ndarray
    weights: list
    biases: list

    def arrays(self):
        return [self.c, self.V, *self.weights, *self.biases]

    def norm(self):
        return float(np.sqrt(sum(np.sum(a * a) for a in self.arrays())))


def _n_time_features(kind):
    return 1 if kind == "t" else 3


def param_arrays(p):
    """Mutable views of every trainable array, in a fixed order."""
    return [p.c, p.V, *p.mlp.weights, *p.mlp.biases]


def init_params(d, k, rng, hidden=(64, 64), c_max=1.0, time_features="t", clip=None):
    """Glorot-uniform MLP, zero biases, random orthonormal ``V``, ``c = c_max / 2``."""
    if not 0 < k < d:
        raise InvalidInputError(f"need 0 < k < d, got d={d}, k={k}")
    if c_max <= 0:
        raise InvalidInputError("c_max must be positive")
    widths = [k + _n_time_features(time_features), *hidden, k]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    v = qr_orthonormalize(rng.standard_normal((d, k)))
    return ScoreNetParams(
        np.full(d, 0.5 * c_max), v, MlpParams(weights, biases), float(c_max), time_features, clip
    )


def _prepare(p, sched, r, t):
    r = np.asarray(r, dtype=np.float64)
    single = r.ndim == 1
    r2 = np.atleast_2d(r)
    if r2.ndim != 2 or r2.shape[1] != p.d:
        raise InvalidInputError(f"expected returns with {p.d} columns, got shape {r.shape}")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (r2.shape[0],))
    a = np.asarray(sched.alpha(t), dtype=np.float64).reshape(-1)
    h = np.asarray(sched.h(t), dtype=np.float64).reshape(-1)
    return r2, single, t, a, h


def _time_block(p, sched, t, a, h):
    cols = [t / sched.T]
    if p.time_features == "t_alpha_h":
        cols += [a, h]
    return np.stack(cols, axis=1)


def _forward(p, sched, r2, t, a, h):
    dmat = 1.0 / (h[:, None] + (a * a)[:, None] * p.c[None, :])
    u = dmat * r2
    z = u @ p.V
    x = np.concatenate([z, _time_block(p, sched, t, a, h)], axis=1)
    acts = [x]
    last = len(p.mlp.weights) - 1
    for i, (w, b) in enumerate(zip(p.mlp.weights, p.mlp.biases)):
        x = x @ w.T + b
        if i < last:
            x = np.maximum(x, 0.0)
        acts.append(x)
    g = acts[-1]
    o = g @ p.V.T
    s = a[:, None] * dmat * o - u
    cache = dict(dmat=dmat, u=u, acts=acts, o=o, raw=s)
    if p.clip is not None:
        norms = np.linalg.norm(s, axis=1)
        scale = np.minimum(1.0, p.clip / np.maximum(norms, 1e-300))
        s = s * scale[:, None]
        cache.update(norms=norms, scale=scale)
    return s, cache


def forward(p, sched, r, t):
    """Evaluate the network on a batch ``r`` of shape ``(n, d)`` (or one row)."""
    r2, single, t, a, h = _prepare(p, sched, r, t)
    s, _ = _forward(p, sched, r2, t, a, h)
    return s[0] if single else s


def loss_and_grad(p, sched, r_t, t, target, weights=None):
    """Mean weighted squared error ``mean_i w_i ||s(r_i, t_i) - target_i||^2`` and its gradient.

    Returns ``(loss, ScoreNetGrads)``.
    """
    r2, _, t, a, h = _prepare(p, sched, r_t, t)
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if target.shape != r2.shape:
        raise InvalidInputError("target shape must match r_t")
    n = r2.shape[0]
    if n == 0:
        raise InvalidInputError("empty batch")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    s, cache = _forward(p, sched, r2, t, a, h)
    resid = s - target
    loss = float(np.sum(w * np.sum(resid * resid, axis=1)) / n)

    gs = (2.0 / n) * w[:, None] * resid
    if p.clip is not None:
        clipped = cache["norms"] > p.clip
        if np.any(clipped):
            unit = cache["raw"][clipped] / cache["norms"][clipped, None]
            gc = gs[clipped]
            gs = gs * cache["scale"][:, None]
            gs[clipped] = cache["scale"][clipped, None] * (
                gc - unit * np.sum(unit * gc, axis=1, keepdims=True)
            )
    dmat, u, acts, o = cache["dmat"], cache["u"], cache["acts"], cache["o"]

    # s = a D o - D r
    g_d = gs * (a[:, None] * o - r2)
    g_o = gs * a[:, None] * dmat
    g_g = g_o @ p.V
    g_v = g_o.T @ acts[-1]

    gw, gb = [None] * len(p.mlp.weights), [None] * len(p.mlp.weights)
    delta = g_g
    for i in range(len(p.mlp.weights) - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ p.mlp.weights[i]
        if i > 0:
            delta = delta * (acts[i] > 0.0)
    g_z = delta[:, : p.k]
    g_v += u.T @ g_z
    g_d += (g_z @ p.V.T) * r2
    g_c = np.sum(g_d * (-(a * a)[:, None] * dmat * dmat), axis=0)
    return loss, ScoreNetGrads(g_c, g_v, gw, gb)


def project_constraints(p):
    """Re-orthonormalize ``V`` and clamp ``c`` to ``[0, c_max]``; returns a new bundle."""
    out = p.copy()
    out.V = qr_orthonormalize(p.V)
    out.c = np.clip(p.c, 0.0, p.c_max)
    return out


# -- checkpoints ------------------------------------------------------------


def to_dict(p, sched=None):
    doc = {
        "version": CHECKPOINT_VERSION,
        "d": p.d,
        "k": p.k,
        "c_max": p.c_max,
        "time_features": p.time_features,
        "clip": p.clip,
        "c": p.c.tolist(),
        "V": p.V.tolist(),
        "weights": [w.tolist() for w in p.mlp.weights],
        "biases": [b.tolist() for b in p.mlp.biases],
        "meta": p.meta,
    }
    if sched is not None:
        doc["schedule"] = {"T": sched.T, "t0": sched.t0}
    return doc


def from_dict(doc):
    if doc.get("version") != CHECKPOINT_VERSION:
        raise InvalidInputError(f"unsupported checkpoint version {doc.get('version')}")
    mlp = MlpParams(
        [np.array(w, dtype=np.float64) for w in doc["weights"]],
        [np.array(b, dtype=np.float64) for b in doc["biases"]],
    )
    p = ScoreNetParams(
        np.array(doc["c"], dtype=np.float64),
        np.array(doc["V"], dtype=np.float64).reshape(doc["d"], doc["k"]),
        mlp,
        float(doc["c_max"]),
        doc.get("time_features", "t"),
        doc.get("clip"),
        dict(doc.get("meta", {})),
    )
    return p


def save_checkpoint(path, p, sched=None):
    """Write a JSON checkpoint; floats are stored with ``repr`` precision, so
    :func:`load_checkpoint` restores every array bit for bit."""
    with open(path, "w") as fh:
        json.dump(to_dict(p, sched), fh)


def load_checkpoint(path):
    """Return ``(params, schedule_dict_or_None)``."""
    with open(path) as fh:
        doc = json.load(fh)
    return from_dict(doc), doc.get("schedule")
