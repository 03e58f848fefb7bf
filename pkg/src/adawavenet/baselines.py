"""Internal sanity baselines: persistence and a single shared linear map."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .data import Dataset, windows
from .tensor import Tensor
from .train import AdamState, adam_step


def baseline_persistence(x_in: np.ndarray, pred_len: int) -> np.ndarray:
    """Repeat the last observed value: x[..., -1] broadcast over pred_len."""
    return np.repeat(x_in[..., -1:], pred_len, axis=-1)


class LinearBaseline:
    """One weight matrix + bias shared by all channels, trained by Adam."""

    def __init__(self, input_len: int, pred_len: int):
        self.input_len = input_len
        self.pred_len = pred_len
        w0 = np.zeros((input_len, pred_len))
        np.fill_diagonal(w0, 1.0)
        self.weight = Tensor(w0, requires_grad=True)
        self.bias = Tensor(np.zeros(pred_len), requires_grad=True)

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(x)).data

    def fit(self, dataset: Dataset, train_cfg: TrainConfig):
        pairs = list(windows(dataset, "train", self.input_len, self.pred_len, "forecast"))
        xs = np.stack([p[0] for p in pairs])
        ys = np.stack([p[1] for p in pairs])
        params = self.parameters()
        state = AdamState(params)
        rng = np.random.default_rng(train_cfg.seed)
        for _ in range(train_cfg.max_epochs):
            order = rng.permutation(len(xs))
            for start in range(0, len(order), train_cfg.batch_size):
                idx = order[start:start + train_cfg.batch_size]
                pred = self.forward(Tensor(xs[idx]))
                loss = T.mse(pred, Tensor(ys[idx]))
                for p in params.values():
                    p.zero_grad()
                loss.backward()
                adam_step(params, state, train_cfg.learning_rate)
        return self
