"""Benchmark harness: runs train+eval cells from a manifest, aggregates
results over seeds, and writes CSV tables, a markdown report and SVG
showcase plots.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, fields

import numpy as np

from .baselines import LinearBaseline, baseline_persistence
from .config import ModelConfig, TrainConfig, to_text
from .data import Dataset, DataError, MaskSpec, build_dataset, downsample, load_csv, \
    make_mask, windows
from .metrics import metrics
from .model import AdaWaveNet, zoh_upsample
from .svgplot import save_chart
from .synth import SynthSpec, denoised_target, generate
from .tensor import Tensor
from .train import build_model, train

# synthetic signals: 1024 points, first 512 for fitting (training plus the
# validation tail used for early stopping), last 512 held out
SYNTH_FRACTIONS = (0.3125, 0.1875, 0.5)


@dataclass
class RunResult:
    task: str
    dataset: str
    setting: str
    mse: float
    mae: float
    runtime_s: float
    config_hash: str
    seed: int

    def __post_init__(self):
        assert self.mse >= 0 and self.mae >= 0
        assert self.mae <= np.sqrt(self.mse) + 1e-12


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    text = to_text(model_cfg) + to_text(train_cfg)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def synth_dataset(family: str, seed: int = 0, **kwargs) -> Dataset:
    spec = SynthSpec(family=family, seed=seed, **kwargs)
    signal = generate(spec)
    return build_dataset([family], signal, SYNTH_FRACTIONS)


def resolve_dataset(name: str, seed: int = 0) -> Dataset:
    if name.startswith("synth:"):
        return synth_dataset(name.split(":", 1)[1], seed=seed)
    if not os.path.exists(name):
        raise DataError(f"dataset file not found: {name}")
    return load_csv(name)


# -- per-task evaluation -----------------------------------------------------

def evaluate_forecast(model: AdaWaveNet, dataset: Dataset, split: str = "test",
                      batch_size: int = 64):
    cfg = model.config
    pairs = list(windows(dataset, split, cfg.input_len, cfg.pred_len, "forecast"))
    preds, tgts = [], []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        x = np.stack([p[0] for p in chunk])
        preds.append(model.forward(Tensor(x)).data)
        tgts.append(np.stack([p[1] for p in chunk]))
    return metrics(np.concatenate(preds), np.concatenate(tgts))


def evaluate_impute(model: AdaWaveNet, dataset: Dataset, mask_spec: MaskSpec,
                    split: str = "test", batch_size: int = 64):
    cfg = model.config
    pairs = list(windows(dataset, split, cfg.input_len, cfg.pred_len, "impute"))
    preds, tgts, masks = [], [], []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        x = np.stack([p[0] for p in chunk])
        m = np.stack([make_mask(mask_spec, x.shape[1:],
                                rng=np.random.default_rng([mask_spec.seed, 0, start + i]))
                      for i in range(len(chunk))])
        preds.append(model.forward(Tensor(x * m)).data)
        tgts.append(x)
        masks.append(1.0 - m)
    return metrics(np.concatenate(preds), np.concatenate(tgts),
                   mask=np.concatenate(masks))


def evaluate_superres(model: AdaWaveNet, dataset: Dataset, ratio: int,
                      split: str = "test", batch_size: int = 64):
    cfg = model.config
    pairs = list(windows(dataset, split, cfg.input_len, cfg.pred_len, "superres"))
    preds, tgts = [], []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        x = np.stack([p[0] for p in chunk])
        low = zoh_upsample(downsample(x, ratio), ratio)
        preds.append(model.forward(Tensor(low)).data)
        tgts.append(x)
    return metrics(np.concatenate(preds), np.concatenate(tgts))


# -- synthetic case study ----------------------------------------------------

def case_study(family: str = "simple", seed: int = 0,
               model_cfg: ModelConfig | None = None,
               train_cfg: TrainConfig | None = None,
               variance_shift: float = 0.0, step_change: float = 0.0,
               with_baselines: bool = True, verbose: bool = False):
    """Train on the first half of a synthetic signal and score forecasts on
    the test half against the denoised reference.

    Returns a dict with model/persistence/linear MSE+MAE on the normalized
    scale, plus the trained model and dataset.
    """
    spec = SynthSpec(family=family, seed=seed, variance_shift=variance_shift,
                     step_change=step_change)
    noisy = generate(spec)
    clean = denoised_target(spec)
    dataset = build_dataset([family], noisy, SYNTH_FRACTIONS)
    model_cfg = model_cfg or ModelConfig(levels=4, kernel_size=7, n_clusters=1,
                                         input_len=96, pred_len=96, seed=seed)
    train_cfg = train_cfg or TrainConfig(learning_rate=5e-3, max_epochs=200,
                                         patience=15, seed=seed)
    model = build_model(dataset, model_cfg)
    train(model, dataset, train_cfg, verbose=verbose)

    # forecast windows fully inside the held-out half, scored vs the
    # denoised signal on the train-split normalized scale
    L, Lp = model_cfg.input_len, model_cfg.pred_len
    test_start = dataset.splits["test"][0]
    norm = lambda v: (v - dataset.mean[:, None]) / dataset.std[:, None]
    noisy_n, clean_n = norm(noisy), norm(clean)
    inputs, targets = [], []
    for t in range(test_start, noisy.shape[1] - L - Lp + 1):
        inputs.append(noisy_n[:, t:t + L])
        targets.append(clean_n[:, t + L:t + L + Lp])
    xs, ys = np.stack(inputs), np.stack(targets)
    preds = []
    for start in range(0, len(xs), 64):
        preds.append(model.forward(Tensor(xs[start:start + 64])).data)
    preds = np.concatenate(preds)
    result = {"model": metrics(preds, ys), "dataset": dataset,
              "trained": model, "inputs": xs, "targets": ys, "preds": preds}
    if with_baselines:
        result["persistence"] = metrics(baseline_persistence(xs, Lp), ys)
        lin = LinearBaseline(L, Lp).fit(dataset, TrainConfig(
            learning_rate=train_cfg.learning_rate,
            max_epochs=train_cfg.max_epochs, seed=seed))
        result["linear"] = metrics(lin.predict(xs), ys)
    return result


# -- manifest-driven benchmark runs ------------------------------------------

_CELL_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
_CELL_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


def run_cell(cell: dict, seed: int, verbose: bool = False) -> RunResult:
    task = cell.get("task", "forecast")
    name = cell["dataset"]
    dataset = resolve_dataset(name, seed=seed)
    model_kwargs = {k: v for k, v in cell.items() if k in _CELL_MODEL_KEYS}
    train_kwargs = {k: v for k, v in cell.items() if k in _CELL_TRAIN_KEYS}
    model_cfg = ModelConfig(task=task, seed=seed, **model_kwargs).validate()
    train_cfg = TrainConfig(seed=seed, **train_kwargs).validate()
    mask_spec = None
    setting = f"L={model_cfg.input_len}"
    if task == "impute":
        mask_spec = MaskSpec(mode=cell.get("mask_mode", "random"),
                             ratio=cell.get("mask_ratio", 0.25), seed=seed)
        train_cfg.loss_mode = "masked"
        model_cfg.revin = cell.get("revin", False)
        setting = f"mask={mask_spec.ratio}:{mask_spec.mode}"
    elif task == "superres":
        model_cfg.sr_ratio = cell.get("sr_ratio", 2)
        model_cfg.revin = cell.get("revin", False)
        setting = f"r={model_cfg.sr_ratio}"
    elif task == "forecast":
        setting = f"Lp={model_cfg.pred_len}"
    t0 = time.time()
    model = build_model(dataset, model_cfg)
    train(model, dataset, train_cfg, mask_spec=mask_spec, verbose=verbose)
    if task == "forecast":
        mse, mae = evaluate_forecast(model, dataset)
    elif task == "impute":
        mse, mae = evaluate_impute(model, dataset, mask_spec)
    else:
        mse, mae = evaluate_superres(model, dataset, model_cfg.sr_ratio)
    return RunResult(task=task, dataset=name, setting=setting, mse=mse, mae=mae,
                     runtime_s=time.time() - t0,
                     config_hash=config_hash(model_cfg, train_cfg), seed=seed)


def run_benchmark(manifest: dict, out_dir: str, verbose: bool = False):
    """Execute every (cell, seed) pair; missing datasets skip with a notice.

    Returns (results, skipped_notices).
    """
    os.makedirs(out_dir, exist_ok=True)
    results, skipped = [], []
    for cell in manifest.get("cells", []):
        for seed in cell.get("seeds", [0]):
            try:
                results.append(run_cell(cell, seed, verbose=verbose))
            except DataError as exc:
                skipped.append(f"{cell.get('dataset')}: {exc}")
    write_results(results, skipped, out_dir)
    return results, skipped


def write_results(results: list[RunResult], skipped: list[str], out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "dataset", "setting", "mse", "mae",
                         "runtime_s", "config_hash", "seed"])
        for r in results:
            writer.writerow([r.task, r.dataset, r.setting, f"{r.mse:.6f}",
                             f"{r.mae:.6f}", f"{r.runtime_s:.2f}",
                             r.config_hash, r.seed])
    with open(os.path.join(out_dir, "report.md"), "w") as fh:
        fh.write(format_report(results, skipped))


def aggregate(results: list[RunResult]):
    """Mean and std of MSE/MAE per (task, dataset, setting) across seeds."""
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.task, r.dataset, r.setting), []).append(r)
    rows = []
    for key, rs in groups.items():
        mses = np.array([r.mse for r in rs])
        maes = np.array([r.mae for r in rs])
        rows.append({"task": key[0], "dataset": key[1], "setting": key[2],
                     "n_seeds": len(rs),
                     "mse_mean": float(mses.mean()), "mse_std": float(mses.std()),
                     "mae_mean": float(maes.mean()), "mae_std": float(maes.std())})
    return rows


def format_report(results: list[RunResult], skipped: list[str]) -> str:
    lines = ["# Benchmark report", ""]
    if results:
        lines += ["| task | dataset | setting | seeds | MSE | MAE |",
                  "|---|---|---|---|---|---|"]
        for row in aggregate(results):
            lines.append(
                f"| {row['task']} | {row['dataset']} | {row['setting']} "
                f"| {row['n_seeds']} "
                f"| {row['mse_mean']:.3f} ± {row['mse_std']:.3f} "
                f"| {row['mae_mean']:.3f} ± {row['mae_std']:.3f} |")
    else:
        lines.append("_no results_")
    if skipped:
        lines += ["", "## Skipped cells", ""]
        lines += [f"- {s}" for s in skipped]
    lines.append("")
    return "\n".join(lines)


def load_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def showcase_plot(path: str, history: np.ndarray, truth: np.ndarray,
                  pred: np.ndarray, title: str = "",
                  masked: tuple[int, int] | None = None):
    """Input/ground-truth/prediction line chart for one channel."""
    series = {"input": np.concatenate([history, np.full(len(truth), history[-1])]),
              "ground truth": np.concatenate([history, truth]),
              "prediction": np.concatenate([history, pred])}
    save_chart(path, series, title=title, shade=masked)
