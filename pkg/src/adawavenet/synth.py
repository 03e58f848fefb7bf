"""Synthetic non-stationary signal generators.

Three families on t ∈ [0, 1]:

    simple      sin(2π f1 t) + sin(2π f2 t) exp(-α (t - t0)²) + β t + ε(t)
    traffic     sin(2π·24 t) + 0.5 sin(4π·24 t) + sin(2π·7 t) + 0.5 t + ε(t)
    electricity 5 sin(2π t) + 2 sin(4π t) + 3 sin(2π·365 t) + 2 t + ε(t)

ε is Gaussian noise. A variance shift multiplies the noise amplitude by
(1 + shift) from the onset index on; a step change adds a constant from the
onset on. Both apply to the test portion only when the onset is set to the
train/test boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("simple", "traffic", "electricity")
DEFAULT_N_POINTS = 1024
DEFAULT_TRAIN_POINTS = 512


class SynthError(ValueError):
    pass


@dataclass
class SynthSpec:
    family: str = "simple"
    f1: float = 5.0
    f2: float = 50.0
    alpha: float = 50.0
    t0: float = 0.5
    beta: float = 1.0
    noise_std: float = 0.1
    variance_shift: float = 0.0   # 0, 1 or 2
    step_change: float = 0.0      # -0.5, 0 or +0.5
    shift_onset: int = DEFAULT_TRAIN_POINTS
    n_points: int = DEFAULT_N_POINTS
    seed: int = 0

    def validate(self):
        if self.family not in FAMILIES:
            raise SynthError(f"unknown family {self.family!r}")
        if self.n_points < 2:
            raise SynthError("n_points must be >= 2")
        return self


def _clean(spec: SynthSpec, t: np.ndarray) -> np.ndarray:
    if spec.family == "simple":
        return (np.sin(2 * np.pi * spec.f1 * t)
                + np.sin(2 * np.pi * spec.f2 * t) * np.exp(-spec.alpha * (t - spec.t0) ** 2)
                + spec.beta * t)
    if spec.family == "traffic":
        return (np.sin(2 * np.pi * 24 * t) + 0.5 * np.sin(4 * np.pi * 24 * t)
                + np.sin(2 * np.pi * 7 * t) + 0.5 * t)
    return (5 * np.sin(2 * np.pi * t) + 2 * np.sin(4 * np.pi * t)
            + 3 * np.sin(2 * np.pi * 365 * t) + 2 * t)


def generate(spec: SynthSpec) -> np.ndarray:
    """Noisy signal with optional variance shift / step change, shape [1, n]."""
    spec.validate()
    t = np.linspace(0.0, 1.0, spec.n_points)
    signal = _clean(spec, t)
    rng = np.random.default_rng(spec.seed)
    eps = rng.normal(0.0, spec.noise_std, spec.n_points)
    onset = spec.shift_onset
    if spec.variance_shift:
        eps[onset:] *= 1.0 + spec.variance_shift
    signal = signal + eps
    if spec.step_change:
        signal[onset:] += spec.step_change
    return signal[None, :]


def denoised_target(spec: SynthSpec) -> np.ndarray:
    """Noise-free, shift-free reference signal, shape [1, n]."""
    spec.validate()
    t = np.linspace(0.0, 1.0, spec.n_points)
    return _clean(spec, t)[None, :]
