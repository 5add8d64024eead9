"""Experiment configuration: nested JSON with defaults and validation.

Every section is a dataclass; :func:`load_config` overlays a user file on
the defaults and rejects unknown keys.  ``--print-config`` dumps
:func:`default_config_dict`.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass

from ..errors import ConfigError, InvalidInputError
from ..sampler import MODES as SAMPLER_MODES
from ..trainer import TrainConfig


@dataclass
class ScheduleSection:
    T: float = 5.0
    t0: float = 0.01


@dataclass
class NetSection:
    hidden: list = field(default_factory=lambda: [64, 64])
    c_max: float = None  # None: largest column variance of the training data
    time_features: str = "t"
    clip: float = None


@dataclass
class TrainSection:
    epochs: int = 200
    steps: int = None  # when set, epochs are derived from a target number of updates
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    m_noise: int = 1
    weighting: str = "uniform"
    patience: int = 0
    heldout_frac: float = 0.1

    def to_train_config(self, seed, n_rows=None):
        """TrainConfig for ``n_rows`` of data; small panels reuse rows with
        extra noise draws so a batch keeps about ``batch_size`` entries."""
        batch = self.batch_size
        m_noise = self.m_noise
        epochs = self.epochs
        if n_rows is not None and n_rows < batch:
            m_noise = max(m_noise, batch // n_rows)
            batch = n_rows
        if self.steps is not None and n_rows is not None:
            per_epoch = -(-n_rows // batch)
            epochs = max(1, -(-self.steps // per_epoch))
        try:
            return TrainConfig(
                epochs, batch, self.learning_rate, self.beta1, self.beta2, self.adam_eps,
                m_noise, self.weighting, seed, self.patience, self.heldout_frac,
            )
        except InvalidInputError as exc:
            raise ConfigError(f"train: {exc}") from None


@dataclass
class SamplerSection:
    steps: int = 200
    mode: str = "euler_maruyama"
    m: int = 4096


@dataclass
class StudySection:
    d: int = 64
    k: int = 4
    sigma_max: float = 0.4
    spec_seed: int = 0
    N: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    repetitions: int = 3
    arms: list = field(default_factory=lambda: ["oracle", "trained"])


@dataclass
class PreprocessSection:
    missing_threshold: float = 0.05
    standardize: bool = True
    winsorize: float = 0.025
    sort_by_volatility: bool = True
    max_assets: int = None


@dataclass
class BacktestSection:
    data: str = None
    train_window: int = 1260
    update_every: int = 63
    methods: list = field(default_factory=lambda: ["EW", "Real Emp+Real Emp"])
    factor_methods: list = field(default_factory=list)
    eta: float = 3.0
    constraint: str = "inf_norm"
    bound: float = 0.05
    cost_bp: float = 20.0
    annualize: bool = False
    k_factors: int = 8
    gamma_rp: float = 10.0
    poet_c: float = 0.5
    reselect_per_window: bool = False
    max_windows: int = None


@dataclass
class ExperimentConfig:
    seed: int = 0
    threads: int = 1
    out: str = "out"
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    net: NetSection = field(default_factory=NetSection)
    train: TrainSection = field(default_factory=TrainSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    study: StudySection = field(default_factory=StudySection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    backtest: BacktestSection = field(default_factory=BacktestSection)

    def to_dict(self):
        return asdict(self)


def default_config_dict():
    return ExperimentConfig().to_dict()


def _overlay(obj, doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    known = {f.name: f for f in fields(obj)}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"unknown config key {path + key!r}")
        current = getattr(obj, key)
        if is_dataclass(current):
            _overlay(current, value, f"{path}{key}.")
        else:
            setattr(obj, key, value)
    return obj


def validate(cfg):
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(cfg.seed, int), "seed must be an integer")
    need(isinstance(cfg.threads, int) and cfg.threads >= 1, "threads must be >= 1")
    s = cfg.schedule
    need(0 < s.t0 < s.T, "schedule: need 0 < t0 < T")
    n = cfg.net
    need(all(isinstance(h, int) and h > 0 for h in n.hidden), "net.hidden must list positive ints")
    need(n.time_features in ("t", "t_alpha_h"), "net.time_features must be 't' or 't_alpha_h'")
    need(n.c_max is None or n.c_max > 0, "net.c_max must be positive")
    t = cfg.train
    need(t.batch_size >= 1 and t.learning_rate > 0 and t.epochs >= 0, "train: bad batch/epochs/lr")
    need(t.weighting in ("uniform", "h_scaled"), "train.weighting must be uniform or h_scaled")
    need(t.steps is None or t.steps >= 1, "train.steps must be >= 1")
    sm = cfg.sampler
    need(sm.steps >= 2 and sm.m >= 1, "sampler: need steps >= 2 and m >= 1")
    need(sm.mode in SAMPLER_MODES, f"sampler.mode must be one of {SAMPLER_MODES}")
    st = cfg.study
    need(0 < st.k < st.d, "study: need 0 < k < d")
    need(all(isinstance(x, int) and x >= 2 for x in st.N), "study.N values must be ints >= 2")
    need(st.repetitions >= 1, "study.repetitions must be >= 1")
    need(set(st.arms) <= {"oracle", "trained"} and st.arms, "study.arms must use oracle/trained")
    need(st.sigma_max > 0, "study.sigma_max must be positive")
    p = cfg.preprocess
    need(0 <= p.missing_threshold < 1, "preprocess.missing_threshold must lie in [0, 1)")
    need(0 <= p.winsorize < 0.5, "preprocess.winsorize must lie in [0, 0.5)")
    b = cfg.backtest
    need(b.train_window >= 2 and b.update_every >= 1, "backtest: bad window lengths")
    need(b.constraint in ("none", "inf_norm", "l1_norm"), "backtest.constraint is invalid")
    need(b.eta > 0 and b.cost_bp >= 0, "backtest: eta must be > 0 and cost_bp >= 0")
    return cfg


def load_config(path=None, overrides=None):
    cfg = ExperimentConfig()
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        _overlay(cfg, doc, "")
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return validate(cfg)


def config_hash(cfg):
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
