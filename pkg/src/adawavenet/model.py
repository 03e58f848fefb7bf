"""The assembled network: decomposition, lifting cascade, channel attention,
inverse cascade, grouped linear trend head, optional RevIN, task adapters,
and the checkpoint format.
"""
from __future__ import annotations

import struct

import numpy as np

from . import tensor as T
from .attention import AttentionHead
from .config import ModelConfig, from_text, to_text
from .decompose import decompose
from .grouped import ChannelClustering, GroupedLinear
from .lifting import LiftingLevel, WaveletPyramid, analyze, synthesize
from .tensor import Tensor

CHECKPOINT_MAGIC = b"AWN1"
CHECKPOINT_VERSION = 1


class RevIN:
    """Reversible per-instance normalization with a learnable affine."""

    def __init__(self, channels: int, eps: float = 1e-8):
        self.eps = eps
        self.scale = Tensor(np.ones((channels, 1)), requires_grad=True)
        self.shift = Tensor(np.zeros((channels, 1)), requires_grad=True)

    def parameters(self):
        return {"scale": self.scale, "shift": self.shift}

    def normalize(self, x: Tensor):
        mu = T.mean(x, axis=-1, keepdims=True)
        centered = T.sub(x, mu)
        sd = T.sqrt(T.add(T.mean(T.mul(centered, centered), axis=-1, keepdims=True),
                          Tensor(self.eps)))
        xn = T.add(T.mul(T.div(centered, sd), self.scale), self.shift)
        return xn, (mu, sd)

    def denormalize(self, y: Tensor, stats):
        mu, sd = stats
        return T.add(T.mul(T.div(T.sub(y, self.shift), self.scale), sd), mu)


class AdaWaveNet:
    def __init__(self, config: ModelConfig, channels: int,
                 clustering: ChannelClustering | None = None):
        config.validate()
        self.config = config
        self.channels = channels
        rng = np.random.default_rng(config.seed)
        if clustering is None:
            if config.n_clusters != 1:
                raise ValueError("n_clusters > 1 requires a fitted clustering")
            clustering = ChannelClustering(
                k=1, assignments=np.zeros(channels, dtype=int),
                centroids=np.zeros((1, 1)))
        if clustering.k != config.n_clusters:
            raise ValueError("clustering k does not match config n_clusters")
        if len(clustering.assignments) != channels:
            raise ValueError("clustering channel count mismatch")
        self.levels = [LiftingLevel(channels, config.kernel_size)
                       for _ in range(config.levels)]
        self.head = AttentionHead(config.final_len, config.final_len,
                                  d_model=config.d_model, heads=config.heads,
                                  rng=rng)
        self.trend_head = GroupedLinear(clustering, config.input_len, config.pred_len)
        self.revin = RevIN(channels) if config.revin else None

    # -- parameters ----------------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for i, level in enumerate(self.levels):
            for name, p in level.parameters(self.config.inverse_mode).items():
                params[f"lifting.{i}.{name}"] = p
        for name, p in self.head.parameters().items():
            params[f"attention.{name}"] = p
        for name, p in self.trend_head.parameters().items():
            params[f"trend.{name}"] = p
        if self.revin is not None:
            for name, p in self.revin.parameters().items():
                params[f"revin.{name}"] = p
        return params

    def set_passthrough_attention(self):
        """Zero the attention mixing path so the head is embed∘target only
        (which is the identity at init). Used for pass-through checks."""
        for p in (self.head.w_q, self.head.w_k, self.head.w_v, self.head.w_out):
            p.data[...] = 0.0

    # -- forward -------------------------------------------------------------
    def forward(self, x: Tensor) -> Tensor:
        """x: [B, C, L] -> [B, C, L_p]."""
        cfg = self.config
        if x.ndim != 3 or x.shape[1] != self.channels or x.shape[2] != cfg.input_len:
            raise T.TensorError(
                f"expected input [B, {self.channels}, {cfg.input_len}], got {x.shape}")
        if self.revin is not None:
            x, stats = self.revin.normalize(x)
        parts = decompose(x, cfg.ma_window)
        pyramid = analyze(parts.seasonal, self.levels)
        approx_hat = self.head.project_approximation(pyramid.approx)
        predicted = WaveletPyramid(approx_hat, pyramid.details, pyramid.pad_flags)
        seasonal_hat = synthesize(predicted, self.levels, mode=cfg.inverse_mode,
                                  eq9_literal=cfg.eq9_literal)
        trend_hat = self.trend_head.project_trend(parts.trend)
        out = T.add(seasonal_hat, trend_hat)
        if self.revin is not None:
            out = self.revin.denormalize(out, stats)
        return out


# -- task adapters -----------------------------------------------------------

def adapt_imputation(x_observed: Tensor, mask: np.ndarray) -> Tensor:
    """Zero-fill masked (mask==0) positions; the mask is binary, 1=observed."""
    if not np.all((mask == 0) | (mask == 1)):
        raise T.TensorError("imputation mask must be binary")
    if mask.shape != x_observed.shape:
        raise T.TensorError("mask shape must match the input")
    return T.mul(x_observed, Tensor(mask))


def zoh_upsample(x_low: np.ndarray, r: int) -> np.ndarray:
    """Repeat each low-resolution sample r times along the last axis."""
    return np.repeat(x_low, r, axis=-1)


def adapt_superres(x_low: Tensor, r: int) -> Tensor:
    if r == 1:
        return x_low
    data = zoh_upsample(x_low.data, r)
    out = Tensor(data)
    if x_low.requires_grad:
        out.requires_grad = True
        out._parents = (x_low,)
        out._backward = lambda g: (
            g.reshape(g.shape[:-1] + (x_low.shape[-1], r)).sum(axis=-1),)
    return out


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(path: str, config: ModelConfig, arrays: dict[str, np.ndarray]):
    """Binary format: magic, version u32, length-prefixed config text, then
    count-prefixed named arrays (name, rank, dims, little-endian f64 data)."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        text = to_text(config).encode("utf-8")
        fh.write(struct.pack("<I", len(text)))
        fh.write(text)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path: str):
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (tlen,) = struct.unpack("<I", fh.read(4))
        config = from_text(ModelConfig, fh.read(tlen).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack("<" + "I" * rank, fh.read(4 * rank))
            n = int(np.prod(shape)) if rank else 1
            arrays[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()
    return config, arrays


def model_state(model: AdaWaveNet, norm_mean=None, norm_std=None) -> dict[str, np.ndarray]:
    arrays = {name: p.data for name, p in model.parameters().items()}
    arrays["clustering.assignments"] = model.trend_head.clustering.assignments.astype(float)
    arrays["clustering.centroids"] = model.trend_head.clustering.centroids
    if norm_mean is not None:
        arrays["norm.mean"] = np.asarray(norm_mean, dtype=float)
        arrays["norm.std"] = np.asarray(norm_std, dtype=float)
    return arrays


def restore_model(config: ModelConfig, arrays: dict[str, np.ndarray]) -> AdaWaveNet:
    assignments = arrays["clustering.assignments"].astype(int)
    clustering = ChannelClustering(k=config.n_clusters, assignments=assignments,
                                  centroids=arrays["clustering.centroids"])
    model = AdaWaveNet(config, channels=len(assignments), clustering=clustering)
    params = model.parameters()
    for name, p in params.items():
        if name not in arrays:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        if arrays[name].shape != p.data.shape:
            raise ValueError(f"checkpoint shape mismatch for {name!r}")
        p.data[...] = arrays[name]
    return model
