import json

import numpy as np
import pytest
from pytest import approx

from adawavenet.baselines import LinearBaseline, baseline_persistence
from adawavenet.bench import (SYNTH_FRACTIONS, RunResult, aggregate,
                              config_hash, format_report, load_manifest,
                              resolve_dataset, run_benchmark, synth_dataset)
from adawavenet.config import ModelConfig, TrainConfig
from adawavenet.data import DataError, build_dataset
from adawavenet.metrics import metrics


class TestMetrics:
    def test_zero_error(self, rng):
        x = rng.normal(size=(3, 8))
        assert metrics(x, x) == (0.0, 0.0)

    def test_constant_offset(self, rng):
        x = rng.normal(size=(3, 8))
        mse, mae = metrics(x + 2.0, x)
        assert mse == approx(4.0)
        assert mae == approx(2.0)

    def test_hand_computed(self):
        mse, mae = metrics(np.array([1.0, 2.0]), np.array([0.0, 4.0]))
        assert mse == approx((1 + 4) / 2)
        assert mae == approx((1 + 2) / 2)

    def test_masked_averages_only_selected(self):
        pred = np.array([1.0, 10.0, 3.0])
        tgt = np.array([0.0, 0.0, 0.0])
        mask = np.array([1.0, 0.0, 1.0])
        mse, mae = metrics(pred, tgt, mask)
        assert mse == approx((1 + 9) / 2)
        assert mae == approx((1 + 3) / 2)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            metrics(np.ones(3), np.ones(3), np.zeros(3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            metrics(np.ones(3), np.ones(4))


class TestBaselines:
    def test_persistence_by_definition(self):
        x = np.array([[[1.0, 2.0, 3.0]]])
        assert baseline_persistence(x, 4) == approx(np.full((1, 1, 4), 3.0))

    def test_linear_identity_init(self, rng):
        lb = LinearBaseline(8, 8)
        x = rng.normal(size=(2, 3, 8))
        assert lb.predict(x) == approx(x)

    def test_linear_fits_exact_linear_map(self, rng):
        """Target = input reversed is linearly expressible; training should
        drive the error well below the identity-init error."""
        t = np.arange(300)
        data = np.sin(2 * np.pi * t / 17.0)[None, :] + 0.01 * rng.normal(size=(1, 300))
        ds = build_dataset(["x"], data, (0.6, 0.2, 0.2))
        lb = LinearBaseline(16, 16)
        from adawavenet.data import windows
        pairs = list(windows(ds, "val", 16, 16, "forecast"))
        xs = np.stack([p[0] for p in pairs])
        ys = np.stack([p[1] for p in pairs])
        before = metrics(lb.predict(xs), ys)[0]
        lb.fit(ds, TrainConfig(learning_rate=5e-3, max_epochs=20, seed=0))
        after = metrics(lb.predict(xs), ys)[0]
        assert after < before * 0.5


class TestRunResult:
    def test_jensen_violation_rejected(self):
        with pytest.raises(AssertionError):
            RunResult("forecast", "d", "s", mse=1.0, mae=1.5,
                      runtime_s=0.0, config_hash="x", seed=0)

    def test_config_hash_is_stable_and_sensitive(self):
        a = config_hash(ModelConfig(), TrainConfig())
        b = config_hash(ModelConfig(), TrainConfig())
        c = config_hash(ModelConfig(levels=3), TrainConfig())
        assert a == b and a != c and len(a) == 12


class TestSynthDataset:
    def test_fractions_give_half_test(self):
        ds = synth_dataset("simple", seed=0)
        assert ds.splits["train"] == (0, 320)
        assert ds.splits["val"] == (320, 512)
        assert ds.splits["test"] == (512, 1024)
        assert abs(sum(SYNTH_FRACTIONS) - 1.0) < 1e-12

    def test_resolve_synth_name(self):
        ds = resolve_dataset("synth:simple", seed=1)
        assert ds.values.shape == (1, 1024)

    def test_resolve_missing_file(self):
        with pytest.raises(DataError):
            resolve_dataset("/nonexistent/data.csv")


class TestAggregate:
    def make(self, seed, mse):
        return RunResult("forecast", "d", "s", mse=mse, mae=np.sqrt(mse) / 2,
                         runtime_s=1.0, config_hash="h", seed=seed)

    def test_multi_seed_mean_std_oracle(self):
        rows = aggregate([self.make(0, 0.4), self.make(1, 0.6), self.make(2, 0.5)])
        assert len(rows) == 1
        row = rows[0]
        assert row["n_seeds"] == 3
        assert row["mse_mean"] == approx(0.5)
        assert row["mse_std"] == approx(np.std([0.4, 0.5, 0.6]))

    def test_groups_split_by_setting(self):
        a = self.make(0, 0.4)
        b = RunResult("forecast", "d", "other", mse=0.1, mae=0.1,
                      runtime_s=1.0, config_hash="h", seed=0)
        assert len(aggregate([a, b])) == 2

    def test_empty(self):
        assert aggregate([]) == []


class TestReportAndManifest:
    def test_empty_report(self):
        text = format_report([], ["ds1: missing"])
        assert "_no results_" in text
        assert "ds1: missing" in text

    def test_report_contains_aggregates(self):
        r = RunResult("forecast", "synth:simple", "Lp=96", mse=0.25, mae=0.3,
                      runtime_s=2.0, config_hash="h", seed=0)
        text = format_report([r], [])
        assert "synth:simple" in text and "0.250" in text

    def test_load_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"cells": [{"dataset": "synth:simple"}]}))
        assert load_manifest(str(path))["cells"][0]["dataset"] == "synth:simple"

    def test_run_benchmark_skips_missing_dataset(self, tmp_path):
        manifest = {"cells": [{"dataset": "/nonexistent/never.csv",
                               "seeds": [0]}]}
        results, skipped = run_benchmark(manifest, str(tmp_path / "out"))
        assert results == []
        assert len(skipped) == 1
        assert (tmp_path / "out" / "report.md").exists()
        assert (tmp_path / "out" / "results.csv").exists()

    def test_run_benchmark_single_synth_cell(self, tmp_path):
        manifest = {"cells": [{"dataset": "synth:simple", "seeds": [0],
                               "levels": 2, "kernel_size": 3, "input_len": 48,
                               "pred_len": 48, "max_epochs": 1,
                               "learning_rate": 1e-3}]}
        results, skipped = run_benchmark(manifest, str(tmp_path / "out"))
        assert skipped == []
        assert len(results) == 1
        assert results[0].task == "forecast"
        assert np.isfinite(results[0].mse)
        lines = (tmp_path / "out" / "results.csv").read_text().splitlines()
        assert len(lines) == 2
