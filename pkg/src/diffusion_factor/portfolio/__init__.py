"""Portfolio construction on top of estimated or generated moments."""

from .backtest import BacktestResult, backtest, max_drawdown, turnover_series
from .factors import (
    FactorExtraction,
    extract_factors_pca,
    extract_factors_poet,
    extract_factors_rppca,
)
from .methods import ALL_MV_METHODS, FACTOR_METHODS, method_weights
from .mvo import Constraint, mean_variance_weights, tangency_weights
from .shrinkage import shrink_bayes_stein, shrink_ledoit_wolf, shrink_olse

__all__ = [
    "ALL_MV_METHODS",
    "BacktestResult",
    "Constraint",
    "FACTOR_METHODS",
    "FactorExtraction",
    "backtest",
    "extract_factors_pca",
    "extract_factors_poet",
    "extract_factors_rppca",
    "max_drawdown",
    "mean_variance_weights",
    "method_weights",
    "shrink_bayes_stein",
    "shrink_ledoit_wolf",
    "shrink_olse",
    "tangency_weights",
    "turnover_series",
]
