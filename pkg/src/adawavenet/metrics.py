"""Evaluation metrics on the normalized scale."""
from __future__ import annotations

import numpy as np


def metrics(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None):
    """(MSE, MAE); with a binary mask, averaged over mask==1 positions only."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    err = pred - target
    if mask is not None:
        if mask.shape != pred.shape:
            raise ValueError("mask shape mismatch")
        denom = mask.sum()
        if denom == 0:
            raise ValueError("empty mask")
        mse = float((mask * err ** 2).sum() / denom)
        mae = float((mask * np.abs(err)).sum() / denom)
    else:
        mse = float((err ** 2).mean())
        mae = float(np.abs(err).mean())
    # Jensen: E|e| <= sqrt(E e^2)
    assert mae <= np.sqrt(mse) + 1e-12
    return mse, mae
