"""Daily-rebalanced backtests with proportional costs and the usual metrics."""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import AlignmentError, InvalidInputError

TRADING_DAYS = 252
REPORT_COLUMNS = ["Method", "Mean", "Std", "SR", "CER", "MDD", "TO"]


@dataclass(frozen=True)
class BacktestResult:
    returns: np.ndarray
    turnover: np.ndarray
    mean: float
    std: float
    sr: float
    cer: float
    mdd: float
    to: float
    annualized: bool = False

    def row(self, method):
        return {
            "Method": method,
            "Mean": self.mean,
            "Std": self.std,
            "SR": self.sr,
            "CER": self.cer,
            "MDD": self.mdd,
            "TO": self.to,
        }


def drifted(w, r):
    """Weights after one day of returns ``r``, renormalized by ``sum w (1 + r)``."""
    grown = w * (1.0 + r)
    return grown / grown.sum()


def turnover_series(weights, returns, first_day="zero"):
    """``TO_t = sum_i |w_t - drift(w_{t-1}, r_{t-1})|``.

    ``first_day="zero"`` sets ``TO_0 = 0``; ``"from_cash"`` charges
    ``sum |w_0|``.
    """
    n = weights.shape[0]
    to = np.zeros(n)
    if first_day == "from_cash":
        to[0] = np.abs(weights[0]).sum()
    elif first_day != "zero":
        raise InvalidInputError(f"unknown first_day rule {first_day!r}")
    for t in range(1, n):
        to[t] = np.abs(weights[t] - drifted(weights[t - 1], returns[t - 1])).sum()
    return to


def max_drawdown(values):
    values = np.asarray(values, dtype=np.float64)
    peak = np.maximum.accumulate(values)
    return float(np.max((peak - values) / peak, initial=0.0))


def summarize(port, to, eta=3.0, annualize=False):
    mean = float(np.mean(port))
    std = float(np.std(port, ddof=1)) if port.size > 1 else 0.0
    var = std * std
    sr = mean / std if std > 0 else np.nan
    cer = mean - 0.5 * eta * var
    # a day losing 100% or more ruins the account: wealth stays at zero
    mdd = max_drawdown(np.concatenate([[1.0], np.cumprod(np.maximum(1.0 + port, 0.0))]))
    avg_to = float(np.mean(to))
    if annualize:
        mean, std, sr = TRADING_DAYS * mean, np.sqrt(TRADING_DAYS) * std, np.sqrt(TRADING_DAYS) * sr
        cer, avg_to = TRADING_DAYS * cer, TRADING_DAYS * avg_to
    return BacktestResult(port, to, mean, std, sr, cer, mdd, avg_to, annualize)


def backtest(weights, returns, cost_bp=0.0, eta=3.0, annualize=False, first_day="zero", dates=None):
    """Evaluate a target-weight schedule on aligned daily returns.

    ``weights`` and ``returns`` are ``(n, d)`` arrays (or
    :class:`~diffusion_factor.panel.ReturnPanel` objects, in which case
    dates and asset ids must match).
    """
    if hasattr(weights, "values") and hasattr(returns, "values"):
        if list(weights.dates) != list(returns.dates) or list(weights.asset_ids) != list(returns.asset_ids):
            raise AlignmentError("weights and returns differ in dates or assets")
        weights, returns = weights.values, returns.values
    w = np.asarray(weights, dtype=np.float64)
    r = np.asarray(returns, dtype=np.float64)
    if w.shape != r.shape:
        raise AlignmentError(f"weights {w.shape} and returns {r.shape} are not aligned")
    if dates is not None and len(dates) != r.shape[0]:
        raise AlignmentError("date index does not match the return rows")
    if r.shape[0] == 0:
        raise InvalidInputError("empty test period")
    to = turnover_series(w, r, first_day)
    port = np.sum(w * r, axis=1) - cost_bp / 1e4 * to
    return summarize(port, to, eta, annualize)


def write_report(path, rows):
    """Write the Method x metrics table."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(REPORT_COLUMNS)
        for row in rows:
            out.writerow([row["Method"], *(repr(float(row[c])) for c in REPORT_COLUMNS[1:])])
