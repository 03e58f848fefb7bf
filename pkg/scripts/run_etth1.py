"""ETTh1 96 -> 96 forecast with the reference hyperparameters (kernel size 7,
4 lifting levels, 4 channel clusters).

The CSV is not bundled; download ETTh1.csv from the ETDataset repository and
pass its path (or set ADAWAVE_ETTH1).

Usage:
    python scripts/run_etth1.py --data data/ETTh1.csv [--out out/etth1]
"""
import argparse
import os
import time

from adawavenet.bench import evaluate_forecast
from adawavenet.config import ModelConfig, TrainConfig
from adawavenet.data import build_dataset, load_csv
from adawavenet.model import model_state, save_checkpoint
from adawavenet.train import build_model, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", default=os.environ.get("ADAWAVE_ETTH1",
                                                         "data/ETTh1.csv"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/etth1")
    args = parser.parse_args()

    full = load_csv(args.data)
    # standard ETTh1 protocol: 12/4/4 months of hourly data
    dataset = build_dataset(full.channel_names, full.values[:, :14400],
                            (0.6, 0.2, 0.2))

    model_cfg = ModelConfig(levels=4, kernel_size=7, n_clusters=4,
                            input_len=96, pred_len=96, seed=args.seed)
    train_cfg = TrainConfig(learning_rate=5e-4, max_epochs=30, patience=3,
                            seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    model = build_model(dataset, model_cfg)
    train(model, dataset, train_cfg,
          log_path=os.path.join(args.out, "training_log.csv"), verbose=True)
    mse, mae = evaluate_forecast(model, dataset)
    print(f"test MSE {mse:.4f}  MAE {mae:.4f}  ({time.time() - t0:.0f}s)")

    ckpt = os.path.join(args.out, "model.awn")
    save_checkpoint(ckpt, model_cfg, model_state(model, dataset.mean, dataset.std))
    print(f"checkpoint: {ckpt}")


if __name__ == "__main__":
    main()
