"""The ``adawave`` command line.

Subcommands: train, eval, forecast, impute, superres, synth, decompose, bench.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import bench as B
from . import svgplot
from .config import ConfigError, ModelConfig, TrainConfig, load_mixed_config
from .data import DataError, MaskSpec, downsample, load_csv, make_mask
from .decompose import decompose
from .lifting import LiftingLevel, analyze
from .model import (adapt_imputation, load_checkpoint, model_state,
                    restore_model, save_checkpoint, zoh_upsample)
from .synth import SynthError, SynthSpec, denoised_target, generate
from .tensor import Tensor, TensorError
from .train import NumericalError, build_model, evaluate, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_csv(path, names, values):
    """values: [C, L] -> one named column per channel."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in np.asarray(values).T:
            writer.writerow([f"{v:.10g}" for v in row])


def _read_window_csv(path):
    """A header + numeric-rows CSV interpreted as one [C, L] window."""
    ds = load_csv(path, (1.0, 0.0, 0.0))
    return ds.channel_names, ds.values


def _load_configs(path):
    if path is None:
        return ModelConfig().validate(), TrainConfig().validate()
    return load_mixed_config(path)


def _resolve(data, seed):
    return B.resolve_dataset(data, seed=seed)


def _load_model(checkpoint):
    config, arrays = load_checkpoint(checkpoint)
    return restore_model(config, arrays), config


def cmd_train(args):
    model_cfg, train_cfg = _load_configs(args.config)
    if args.seed is not None:
        model_cfg.seed = train_cfg.seed = args.seed
    if args.eq9_literal:
        model_cfg.eq9_literal = True
    dataset = _resolve(args.data, model_cfg.seed)
    mask_spec = None
    if model_cfg.task == "impute":
        mask_spec = MaskSpec(mode=args.mask_mode, ratio=args.mask_ratio,
                             seed=train_cfg.seed)
        train_cfg.loss_mode = "masked"
    model = build_model(dataset, model_cfg)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "training_log.csv")
    history, best_val = train(model, dataset, train_cfg, mask_spec=mask_spec,
                              log_path=log_path, verbose=not args.quiet)
    ckpt = args.checkpoint or os.path.join(args.out, "model.awn")
    save_checkpoint(ckpt, model_cfg,
                    model_state(model, dataset.mean, dataset.std))
    print(f"best validation loss {best_val:.6f} after {len(history)} epochs")
    print(f"checkpoint: {ckpt}")
    print(f"log: {log_path}")
    # cluster assignments for inspection
    _write_csv(os.path.join(args.out, "cluster_assignments.csv"),
               ["channel", "cluster"],
               np.stack([np.arange(model.channels),
                         model.trend_head.clustering.assignments]))
    return EXIT_OK


def cmd_eval(args):
    model, config = _load_model(args.checkpoint)
    dataset = _resolve(args.data, config.seed)
    if config.task == "forecast":
        mse, mae = B.evaluate_forecast(model, dataset)
    elif config.task == "impute":
        spec = MaskSpec(mode=args.mask_mode, ratio=args.mask_ratio, seed=config.seed)
        mse, mae = B.evaluate_impute(model, dataset, spec)
    else:
        mse, mae = B.evaluate_superres(model, dataset, config.sr_ratio)
    print(f"task={config.task} test MSE={mse:.6f} MAE={mae:.6f}")
    return EXIT_OK


def cmd_forecast(args):
    model, config = _load_model(args.checkpoint)
    dataset = _resolve(args.data, config.seed)
    test = dataset.split_values("test")
    L, Lp = config.input_len, config.pred_len
    x = test[:, -L - Lp:-Lp]
    truth = test[:, -Lp:]
    pred = model.forward(Tensor(x[None])).data[0]
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "forecast.csv"), dataset.channel_names, pred)
    B.showcase_plot(os.path.join(args.out, "forecast.svg"), x[args.channel],
                    truth[args.channel], pred[args.channel],
                    title=f"forecast (channel {args.channel})")
    print(f"wrote forecast.csv and forecast.svg to {args.out}")
    return EXIT_OK


def cmd_impute(args):
    model, config = _load_model(args.checkpoint)
    dataset = _resolve(args.data, config.seed)
    test = dataset.split_values("test")
    L = config.input_len
    x = test[:, :L]
    spec = MaskSpec(mode=args.mask_mode, ratio=args.mask_ratio, seed=args.seed or 0)
    mask = make_mask(spec, x.shape)
    pred = model.forward(adapt_imputation(Tensor(x[None]), mask[None])).data[0]
    filled = np.where(mask == 1, x, pred)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "imputed.csv"), dataset.channel_names, filled)
    _write_csv(os.path.join(args.out, "mask.csv"), dataset.channel_names, mask)
    ch = args.channel
    shade = None
    if spec.mode == "extended":
        gaps = np.where(mask[ch] == 0)[0]
        shade = (int(gaps[0]), int(gaps[-1]) + 1)
    svgplot.save_chart(os.path.join(args.out, "imputed.svg"),
                       {"ground truth": x[ch], "imputed": filled[ch]},
                       title=f"imputation mask={spec.ratio} ({spec.mode})",
                       shade=shade)
    print(f"wrote imputed.csv, mask.csv and imputed.svg to {args.out}")
    return EXIT_OK


def cmd_superres(args):
    model, config = _load_model(args.checkpoint)
    dataset = _resolve(args.data, config.seed)
    test = dataset.split_values("test")
    L = config.input_len
    x = test[:, :L]
    low = downsample(x, args.ratio)
    pred = model.forward(Tensor(zoh_upsample(low, args.ratio)[None])).data[0]
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "superres.csv"), dataset.channel_names, pred)
    ch = args.channel
    svgplot.save_chart(os.path.join(args.out, "superres.svg"),
                       {"ground truth": x[ch],
                        "low-res input": zoh_upsample(low, args.ratio)[ch],
                        "prediction": pred[ch]},
                       title=f"super-resolution r={args.ratio}")
    print(f"wrote superres.csv and superres.svg to {args.out}")
    return EXIT_OK


def cmd_synth(args):
    spec = SynthSpec(family=args.family, variance_shift=args.variance_shift,
                     step_change=args.step_change, seed=args.seed or 0,
                     n_points=args.n_points)
    signal = generate(spec)
    clean = denoised_target(spec)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "signal.csv"), [args.family], signal)
    _write_csv(os.path.join(args.out, "denoised.csv"), [args.family], clean)
    print(f"wrote signal.csv and denoised.csv to {args.out}")
    return EXIT_OK


def cmd_decompose(args):
    names, values = _read_window_csv(args.data)
    os.makedirs(args.out, exist_ok=True)
    parts = decompose(Tensor(values), args.ma_window)
    _write_csv(os.path.join(args.out, "seasonal.csv"), names, parts.seasonal.data)
    _write_csv(os.path.join(args.out, "trend.csv"), names, parts.trend.data)
    outputs = ["seasonal.csv", "trend.csv"]
    if args.wavelet:
        levels = [LiftingLevel(values.shape[0], args.kernel_size)
                  for _ in range(args.levels)]
        pyramid = analyze(parts.seasonal, levels)
        cur = parts.seasonal
        for i, detail in enumerate(pyramid.details, 1):
            approx = pyramid.approx if i == len(pyramid.details) else None
            _write_csv(os.path.join(args.out, f"coeffs_level{i}.csv"),
                       names, detail.data)
            outputs.append(f"coeffs_level{i}.csv")
        # per-level approximations re-derived for the dump
        from .lifting import lift_forward
        cur = parts.seasonal
        for i, level in enumerate(levels, 1):
            cur, _ = lift_forward(cur, level)
            _write_csv(os.path.join(args.out, f"approx_level{i}.csv"),
                       names, cur.data)
            outputs.append(f"approx_level{i}.csv")
    print(f"wrote {', '.join(outputs)} to {args.out}")
    return EXIT_OK


def cmd_bench(args):
    manifest = B.load_manifest(args.manifest)
    results, skipped = B.run_benchmark(manifest, args.out, verbose=not args.quiet)
    for line in open(os.path.join(args.out, "report.md")):
        print(line, end="")
    if skipped:
        print(f"{len(skipped)} cell(s) skipped", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="adawave",
                     description="Adaptive wavelet network for time series")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, checkpoint=False):
        if data:
            p.add_argument("--data", required=True,
                           help="CSV path or synth:<family>")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--checkpoint", help="checkpoint output path")
    p.add_argument("--mask-mode", default="random", choices=["random", "extended"])
    p.add_argument("--mask-ratio", type=float, default=0.25)
    p.add_argument("--eq9-literal", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p, checkpoint=True)
    p.add_argument("--mask-mode", default="random", choices=["random", "extended"])
    p.add_argument("--mask-ratio", type=float, default=0.25)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forecast", help="forecast the final test window")
    common(p, checkpoint=True)
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("impute", help="impute a masked test window")
    common(p, checkpoint=True)
    p.add_argument("--mask-mode", default="random", choices=["random", "extended"])
    p.add_argument("--mask-ratio", type=float, default=0.25)
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("superres", help="reconstruct from a downsampled window")
    common(p, checkpoint=True)
    p.add_argument("--ratio", type=int, default=2)
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_superres)

    p = sub.add_parser("synth", help="generate a synthetic signal")
    common(p, data=False)
    p.add_argument("--family", default="simple",
                   choices=["simple", "traffic", "electricity"])
    p.add_argument("--variance-shift", type=float, default=0.0)
    p.add_argument("--step-change", type=float, default=0.0)
    p.add_argument("--n-points", type=int, default=1024)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="seasonal/trend split of a CSV window")
    common(p)
    p.add_argument("--ma-window", type=int, default=25)
    p.add_argument("--wavelet", action="store_true",
                   help="also dump per-level approximations and coefficients")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--kernel-size", type=int, default=7)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("bench", help="run a benchmark manifest")
    common(p, data=False)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, SynthError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, TensorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
