"""Configuration, ingestion, pipelines and the command-line interface."""

from .config import ExperimentConfig, load_config
from .pipeline import FittedModel, fit_diffusion

__all__ = ["ExperimentConfig", "FittedModel", "fit_diffusion", "load_config"]
