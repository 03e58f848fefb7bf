"""Training loop: Adam, gradient clipping, early stopping, logging."""
from __future__ import annotations

import csv
import time

import numpy as np

from . import tensor as T
from .config import ModelConfig, TrainConfig
from .data import Dataset, MaskSpec, downsample, make_mask, windows
from .decompose import decompose
from .grouped import fit_clustering
from .model import AdaWaveNet, adapt_imputation, zoh_upsample
from .tensor import Tensor


class NumericalError(RuntimeError):
    pass


class AdamState:
    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float):
    """Standard bias-corrected Adam update; grads must be populated."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        mhat = state.m[name] / (1 - b1 ** t)
        vhat = state.v[name] / (1 - b2 ** t)
        p.data -= lr * mhat / (np.sqrt(vhat) + state.eps)


def clip_gradients(params: dict[str, Tensor], max_norm: float) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad ** 2).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


def build_model(dataset: Dataset, config: ModelConfig) -> AdaWaveNet:
    """Construct the model, fitting the channel clustering on train trends."""
    channels = dataset.values.shape[0]
    clustering = None
    if config.n_clusters > 1:
        trains = [x for x, _ in windows(dataset, "train", config.input_len,
                                        config.pred_len, config.task)]
        sample = np.stack(trains[:512])
        trends = np.stack([decompose(Tensor(w), config.ma_window).trend.data
                           for w in sample])
        clustering = fit_clustering(trends, config.n_clusters, seed=config.seed)
    return AdaWaveNet(config, channels=channels, clustering=clustering)


def _prepare_batch(task, xs, ys, idx, mask_spec, sr_ratio, mask_salt):
    """Assemble (input, target, loss_mask) numpy batches for one task."""
    x = xs[idx]
    y = ys[idx]
    if task == "forecast":
        return x, y, None
    if task == "impute":
        masks = np.stack([
            make_mask(mask_spec, x.shape[1:],
                      rng=np.random.default_rng([mask_spec.seed, mask_salt, int(i)]))
            for i in idx])
        return x * masks, y, 1.0 - masks
    if task == "superres":
        low = downsample(x, sr_ratio)
        return zoh_upsample(low, sr_ratio), y, None
    raise ValueError(f"unknown task {task!r}")


def evaluate(model: AdaWaveNet, dataset: Dataset, split: str,
             mask_spec: MaskSpec | None = None, batch_size: int = 64):
    """Average loss (masked for imputation) over a split."""
    cfg = model.config
    pairs = list(windows(dataset, split, cfg.input_len, cfg.pred_len, cfg.task))
    xs = np.stack([p[0] for p in pairs])
    ys = np.stack([p[1] for p in pairs])
    total, weight = 0.0, 0.0
    for start in range(0, len(xs), batch_size):
        idx = np.arange(start, min(start + batch_size, len(xs)))
        inp, tgt, lm = _prepare_batch(cfg.task, xs, ys, idx, mask_spec,
                                      cfg.sr_ratio, mask_salt=0)
        pred = model.forward(Tensor(inp))
        loss = T.mse(pred, Tensor(tgt), mask=Tensor(lm) if lm is not None else None)
        w = lm.sum() if lm is not None else tgt.size
        total += loss.item() * w
        weight += w
    return total / weight


def train(model: AdaWaveNet, dataset: Dataset, train_cfg: TrainConfig,
          mask_spec: MaskSpec | None = None, log_path: str | None = None,
          verbose: bool = False):
    """Minimize (masked) MSE on train windows with early stopping on the
    validation split; the best-validation parameters are restored in place.

    Returns (history, best_val_loss); history rows are
    (epoch, train_loss, val_loss, lr, seconds).
    """
    cfg = model.config
    train_cfg.validate()
    if cfg.task == "impute" and mask_spec is None:
        raise ValueError("imputation training requires a mask spec")
    pairs = list(windows(dataset, "train", cfg.input_len, cfg.pred_len, cfg.task))
    xs = np.stack([p[0] for p in pairs])
    ys = np.stack([p[1] for p in pairs])
    params = model.parameters()
    state = AdamState(params)
    rng = np.random.default_rng(train_cfg.seed)

    history = []
    best_val = np.inf
    best_state = {k: p.data.copy() for k, p in params.items()}
    bad_epochs = 0
    for epoch in range(train_cfg.max_epochs):
        t_start = time.time()
        order = rng.permutation(len(xs))
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            inp, tgt, lm = _prepare_batch(cfg.task, xs, ys, idx, mask_spec,
                                          cfg.sr_ratio, mask_salt=epoch + 1)
            pred = model.forward(Tensor(inp))
            loss = T.mse(pred, Tensor(tgt),
                         mask=Tensor(lm) if lm is not None else None)
            if not np.isfinite(loss.item()):
                raise NumericalError(_nan_diagnostic(params, "loss is non-finite"))
            for p in params.values():
                p.zero_grad()
            loss.backward()
            bad = [k for k, p in params.items()
                   if p.grad is not None and not np.all(np.isfinite(p.grad))]
            if bad:
                raise NumericalError(_nan_diagnostic(params, f"non-finite grads in {bad}"))
            clip_gradients(params, train_cfg.clip_norm)
            adam_step(params, state, train_cfg.learning_rate)
            epoch_loss += loss.item()
            n_batches += 1
        val_loss = evaluate(model, dataset, "val", mask_spec=mask_spec)
        seconds = time.time() - t_start
        history.append((epoch, epoch_loss / max(n_batches, 1), val_loss,
                        train_cfg.learning_rate, seconds))
        if verbose:
            print(f"epoch {epoch}: train {epoch_loss / max(n_batches, 1):.6f} "
                  f"val {val_loss:.6f} ({seconds:.1f}s)")
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_state = {k: p.data.copy() for k, p in params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= train_cfg.patience:
                break
    for k, p in params.items():
        p.data[...] = best_state[k]
    if log_path:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "lr", "seconds"])
            writer.writerows(history)
    return history, best_val


def _nan_diagnostic(params, msg):
    finite = {k: bool(np.all(np.isfinite(p.data))) for k, p in params.items()}
    broken = [k for k, ok in finite.items() if not ok]
    return f"{msg}; non-finite parameter groups: {broken or 'none'}"
