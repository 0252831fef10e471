"""Frequency-domain time-series forecasting and anomaly detection.

A single complex-valued linear layer interpolates the low-pass-filtered
spectrum of a normalized window to the spectrum of a longer window; the
inverse transform yields the forecast (or the reconstruction used for
anomaly scoring).
"""

from .model import (
    ComplexLinear,
    ModelConfig,
    Supervision,
    init_params,
    load_checkpoint,
    model_backward,
    model_forward,
    param_count,
    save_checkpoint,
)
from .training import TrainSpec, evaluate, grid_search, train

__all__ = [
    "ComplexLinear",
    "ModelConfig",
    "Supervision",
    "TrainSpec",
    "evaluate",
    "grid_search",
    "init_params",
    "load_checkpoint",
    "model_backward",
    "model_forward",
    "param_count",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
