"""Portfolio method matrix.

A mean-variance method is a (mean source, mean estimator, covariance
source, covariance estimator) tuple, named like ``"Real BS+Diff LW"``.
Sources are ``Real`` (the training window) and ``Diff`` (samples drawn
from the fitted diffusion model); estimators are ``Emp``, ``BS``,
``OLSE`` for the mean and ``Emp``, ``LW`` for the covariance.  ``EW``
and ``VW`` need no moments.  Factor methods (``PCA``, ``POET``,
``RPPCA`` and their ``Diff+`` variants) extract a projection and hold the
tangency portfolio of the extracted factors.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..estimation import sample_moments
from .factors import EXTRACTORS
from .mvo import mean_variance_weights, tangency_weights
from .shrinkage import shrink_bayes_stein, shrink_ledoit_wolf, shrink_olse

log = logging.getLogger(__name__)

MEAN_ESTIMATORS = ("Emp", "BS", "OLSE")
COV_ESTIMATORS = ("Emp", "LW")


@dataclass(frozen=True)
class MVMethod:
    mean_source: str
    mean_est: str
    cov_source: str
    cov_est: str

    @property
    def name(self):
        return f"{self.mean_source} {self.mean_est}+{self.cov_source} {self.cov_est}"

    @property
    def needs_diff(self):
        return "Diff" in (self.mean_source, self.cov_source)


def _mv_matrix():
    out = []
    for src in ("Real", "Diff"):
        for cov_est in COV_ESTIMATORS:
            for mean_est in MEAN_ESTIMATORS:
                out.append(MVMethod(src, mean_est, src, cov_est))
    out.append(MVMethod("Real", "Emp", "Diff", "Emp"))
    out.append(MVMethod("Diff", "Emp", "Real", "Emp"))
    return out


MV_METHODS = {m.name: m for m in _mv_matrix()}
ALL_MV_METHODS = ["EW", "VW", *MV_METHODS]
FACTOR_METHODS = ["PCA", "POET", "RPPCA", "Diff+PCA", "Diff+POET", "Diff+RPPCA"]


def parse_method(name):
    if name in ("EW", "VW"):
        return name
    if name in MV_METHODS:
        return MV_METHODS[name]
    if name in FACTOR_METHODS:
        return name
    raise InvalidInputError(f"unknown portfolio method {name!r}")


def needs_diff(name):
    m = parse_method(name)
    if isinstance(m, MVMethod):
        return m.needs_diff
    return isinstance(m, str) and m.startswith("Diff+")


def _mean(est, moments, n):
    if est == "BS":
        return shrink_bayes_stein(moments, n).mean
    if est == "OLSE":
        return shrink_olse(moments, n).mean
    return moments.mean


def _cov(est, moments, n, data):
    if est == "LW":
        return shrink_ledoit_wolf(moments, n, data=data).cov
    return moments.cov


def method_weights(name, real, diff=None, eta=3.0, constraint=None, market_cap=None, **factor_kw):
    """Target weights for ``name`` from training rows ``real`` and generated rows ``diff``.

    ``market_cap`` is the latest cap vector, used by ``VW``.
    """
    m = parse_method(name)
    real = np.asarray(real, dtype=np.float64)
    d = real.shape[1]
    if m == "EW":
        return np.full(d, 1.0 / d)
    if m == "VW":
        if market_cap is None:
            log.warning("VW requested without market caps; using equal weights")
            return np.full(d, 1.0 / d)
        cap = np.asarray(market_cap, dtype=np.float64)
        return cap / cap.sum()
    if needs_diff(name) and diff is None:
        raise InvalidInputError(f"{name} needs generated samples")
    data = {"Real": real, "Diff": None if diff is None else np.asarray(diff, dtype=np.float64)}
    if isinstance(m, MVMethod):
        mm = sample_moments(data[m.mean_source])
        cm = mm if m.cov_source == m.mean_source else sample_moments(data[m.cov_source])
        mean = _mean(m.mean_est, mm, mm.n_used)
        cov = _cov(m.cov_est, cm, cm.n_used, data[m.cov_source])
        return mean_variance_weights((mean, cov), eta, constraint)
    source = data["Diff"] if m.startswith("Diff+") else real
    kind = m.split("+")[-1]
    return factor_tangency(source, kind, **factor_kw)


def factor_tangency(x, kind, k=8, gamma_rp=10.0, c_threshold=0.5):
    """Asset weights ``P w`` for the tangency portfolio ``w`` of the extracted factors."""
    if kind == "RPPCA":
        fx = EXTRACTORS[kind](x, k, gamma_rp)
    elif kind == "POET":
        fx = EXTRACTORS[kind](x, k, c_threshold)
    else:
        fx = EXTRACTORS[kind](x, k)
    fm = sample_moments(fx.factors)
    return fx.projection @ tangency_weights(fm.mean, fm.cov)
