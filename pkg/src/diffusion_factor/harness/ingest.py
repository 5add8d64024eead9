"""CSV ingestion and the per-window preprocessing steps."""

import logging
import os
import re
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..panel import ReturnPanel, read_panel_csv

log = logging.getLogger(__name__)

ISO_DATE = re.compile(r"^\d{4}-?\d{2}-?\d{2}")
DATE_HEADERS = {"", "date", "dates", "time", "sample", "id"}


def _has_date_column(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        first = fh.readline().strip().split(",")
    if header and header[0].strip().lower() in DATE_HEADERS:
        return True
    return bool(first and first[0]) and not _is_number(first[0])


def drop_missing(panel, threshold):
    """Drop assets whose missing fraction exceeds ``threshold``; zero-fill the rest."""
    frac = panel.missing.mean(axis=0)
    keep = frac <= threshold
    for j in np.nonzero(~keep)[0]:
        what = "all values missing" if frac[j] == 1.0 else f"{frac[j]:.1%} missing"
        log.warning("dropping asset %s (%s)", panel.asset_ids[j], what)
    out = panel.columns(keep)
    out.values = np.where(np.isfinite(out.values), out.values, 0.0)
    return out


def sort_by_volatility(panel):
    order = np.argsort(-np.std(panel.values, axis=0), kind="stable")
    return panel.columns(order)


def select_largest(panel, count):
    if count is None or count >= panel.d:
        return panel
    if panel.market_cap is None:
        log.warning("no market caps; keeping the first %d assets", count)
        return panel.columns(np.arange(count))
    cap = np.nanmean(panel.market_cap, axis=0)
    keep = np.sort(np.argsort(-cap, kind="stable")[:count])
    return panel.columns(keep)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x):
        return (x - self.mean) / self.std

    def invert(self, z):
        return self.mean + z * self.std


def standardize(values, min_std=1e-12):
    """Column z-scores.  Returns ``(z, Standardizer, keep_mask)``; columns with
    zero standard deviation are dropped (``keep_mask`` False) with a warning."""
    x = np.asarray(values, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    keep = std > min_std * np.maximum(1.0, np.abs(mean))
    if not np.all(keep):
        log.warning("dropping %d zero-variance column(s)", int((~keep).sum()))
    st = Standardizer(mean[keep], std[keep])
    return st.apply(x[:, keep]), st, keep


def winsorize(values, q, rng):
    """Replace values beyond the per-column ``q`` / ``1 - q`` quantiles by
    uniformly resampled non-extreme values of the same sign."""
    x = np.array(values, dtype=np.float64, copy=True)
    if q <= 0:
        return x
    for j in range(x.shape[1]):
        col = x[:, j]
        lo, hi = np.quantile(col, [q, 1.0 - q])
        extreme = (col < lo) | (col > hi)
        if not np.any(extreme):
            continue
        inner = col[~extreme]
        for i in np.nonzero(extreme)[0]:
            pool = inner[inner > 0] if col[i] > 0 else inner[inner <= 0]
            col[i] = rng.choice(pool) if pool.size else (hi if col[i] > hi else lo)
        x[:, j] = col
    return x


def ingest_csv(path, cfg, market_cap_path=None, transform_seed=None):
    """Read a return CSV and apply the universe-level steps.

    Missing-value filtering, universe selection and volatility ordering
    always happen here.  Standardization and winsorization are window-level
    (:func:`preprocess_window`); pass ``transform_seed`` to apply them to the
    whole panel as one window.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    panel = read_panel_csv(path, date_column=_has_date_column(path))
    keys = _date_keys(panel.dates)
    if keys is not None and any(b < a for a, b in zip(keys, keys[1:])):
        raise DataError(f"{path}: dates are not monotone")
    if market_cap_path is not None:
        caps = read_panel_csv(market_cap_path, date_column=_has_date_column(market_cap_path))
        if caps.asset_ids != panel.asset_ids or caps.n != panel.n:
            raise DataError("market-cap file does not match the return panel")
        panel.market_cap = caps.values
    panel.mask = panel.missing
    panel = drop_missing(panel, cfg.missing_threshold)
    if panel.d == 0:
        raise DataError(f"{path}: no assets left after the missing-value filter")
    panel = select_largest(panel, cfg.max_assets)
    if cfg.sort_by_volatility:
        panel = sort_by_volatility(panel)
    if transform_seed is not None:
        z, _, keep = preprocess_window(panel.values, cfg, np.random.default_rng(transform_seed))
        panel = panel.columns(keep)
        panel.values = z
    return panel


def _date_keys(labels):
    """Sort keys for numeric or ISO-style date labels; None for sample ids."""
    if all(map(_is_number, labels)):
        return [float(x) for x in labels]
    if all(ISO_DATE.match(x) for x in labels):
        return labels
    return None


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def preprocess_window(values, cfg, rng):
    """Standardize (optional) then winsorize a training window.

    Returns ``(z, Standardizer or None, keep_mask)``.
    """
    x = np.asarray(values, dtype=np.float64)
    if cfg.standardize:
        z, st, keep = standardize(x)
    else:
        z, st, keep = x, None, np.ones(x.shape[1], dtype=bool)
    return winsorize(z, cfg.winsorize, rng), st, keep


__all__ = [
    "ReturnPanel",
    "Standardizer",
    "drop_missing",
    "ingest_csv",
    "preprocess_window",
    "sort_by_volatility",
    "standardize",
    "winsorize",
]
