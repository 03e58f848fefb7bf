"""Adaptive lifting-scheme wavelet network for time-series forecasting,
imputation and super-resolution."""

from .config import ModelConfig, TrainConfig
from .model import AdaWaveNet
from .tensor import Tensor

__all__ = ["AdaWaveNet", "ModelConfig", "TrainConfig", "Tensor"]
__version__ = "0.1.0"
