"""Diffusion factor models for return panels.

Score-based generative modelling with a factor-structured score network,
subspace recovery from generated data, and shrinkage-aware portfolio
construction.
"""

from ._backend import BACKEND
from .diffusion import DiffusionSchedule, FactorModelSpec, GaussianLaw, MixtureLaw, PointMass
from .estimation import MomentEstimate, SubspaceEstimate
from .panel import ReturnPanel

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiffusionSchedule",
    "FactorModelSpec",
    "GaussianLaw",
    "MixtureLaw",
    "PointMass",
    "MomentEstimate",
    "ReturnPanel",
    "SubspaceEstimate",
    "__version__",
]
