"""Rolling-window portfolio backtest.

At each rebalance date the trailing ``train_window`` rows are
preprocessed (standardize, winsorize), a diffusion model is fitted when a
``Diff`` method is requested, and every method's target weights are held
for the next ``update_every`` days with daily rebalancing back to target.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..portfolio.backtest import backtest
from ..portfolio.methods import method_weights, needs_diff, parse_method
from ..portfolio.mvo import Constraint
from .ingest import preprocess_window
from .pipeline import fit_diffusion


@dataclass
class BacktestRun:
    methods: list
    dates: list
    asset_ids: list
    weights: dict = field(default_factory=dict)  # method -> (n_test, d)
    results: dict = field(default_factory=dict)  # method -> BacktestResult
    returns: np.ndarray = None

    def report_rows(self):
        return [self.results[m].row(m) for m in self.methods]


def window_starts(n, train_window, update_every, max_windows=None):
    if n <= train_window:
        raise ConfigError(f"panel has {n} rows; need more than train_window={train_window}")
    starts = list(range(train_window, n, update_every))
    return starts[:max_windows] if max_windows else starts


def _window_weights(cfg, panel, methods, idx, start):
    b = cfg.backtest
    lo = start - b.train_window
    raw = panel.values[lo:start]
    cols = np.arange(panel.d)
    if b.reselect_per_window and panel.mask is not None:
        frac = panel.mask[lo:start].mean(axis=0)
        cols = np.nonzero(frac <= cfg.preprocess.missing_threshold)[0]
    rng = np.random.default_rng([cfg.seed, idx, 0])
    z, st, keep = preprocess_window(raw[:, cols], cfg.preprocess, rng)
    cols = cols[keep]
    real = st.invert(z) if st is not None else z
    diff = None
    if any(needs_diff(m) for m in methods):
        model = fit_diffusion(z, cfg, min(b.k_factors, z.shape[1] - 1), (cfg.seed, idx, 1))
        gen = model.generate(cfg.sampler.m, (cfg.seed, idx, 2), cfg.sampler.steps, cfg.sampler.mode)
        diff = st.invert(gen) if st is not None else gen
    cap = None if panel.market_cap is None else panel.market_cap[start - 1, cols]
    constraint = Constraint(b.constraint, b.bound if b.constraint != "none" else None)
    out = {}
    for m in methods:
        w = np.zeros(panel.d)
        w[cols] = method_weights(
            m, real, diff, b.eta, constraint, cap, k=b.k_factors, gamma_rp=b.gamma_rp, c_threshold=b.poet_c
        )
        out[m] = w
    return out


def run_backtest(cfg, panel):
    """Backtest every configured method on ``panel`` (already ingested)."""
    b = cfg.backtest
    methods = list(b.methods) + list(b.factor_methods)
    if not methods:
        raise ConfigError("no portfolio methods configured")
    for m in methods:
        try:
            parse_method(m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    starts = window_starts(panel.n, b.train_window, b.update_every, b.max_windows)
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        per_window = list(
            pool.map(lambda a: _window_weights(cfg, panel, methods, *a), list(enumerate(starts)))
        )
    spans = [(s, min(s + b.update_every, panel.n)) for s in starts]
    test = np.concatenate([panel.values[s:e] for s, e in spans])
    dates = [panel.dates[i] for s, e in spans for i in range(s, e)]
    run = BacktestRun(methods, dates, list(panel.asset_ids), returns=test)
    for m in methods:
        w = np.concatenate([np.tile(ws[m], (e - s, 1)) for ws, (s, e) in zip(per_window, spans)])
        run.weights[m] = w
        run.results[m] = backtest(w, test, b.cost_bp, b.eta, b.annualize)
    return run
