"""Dataclass configs and the key=value text format they serialize to."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

TASKS = ("forecast", "impute", "superres")
INVERSE_MODES = ("tied", "learned")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    levels: int = 4
    kernel_size: int = 7
    n_clusters: int = 1
    ma_window: int = 25
    d_model: int = 128
    heads: int = 4
    revin: bool = True
    inverse_mode: str = "learned"
    task: str = "forecast"
    input_len: int = 96
    pred_len: int = 96
    sr_ratio: int = 1
    eq9_literal: bool = False
    seed: int = 0

    def validate(self) -> "ModelConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.inverse_mode not in INVERSE_MODES:
            raise ConfigError(f"unknown inverse mode {self.inverse_mode!r}")
        if self.pred_len != self.input_len:
            raise ConfigError(
                "pred_len must equal input_len (the architecture aligns analysis "
                "and synthesis coefficient lengths)")
        if self.ma_window % 2 == 0 or self.ma_window < 1:
            raise ConfigError("ma_window must be odd and >= 1")
        if self.final_len < 4:
            raise ConfigError(
                f"input_len {self.input_len} too short for {self.levels} levels")
        if self.d_model % self.heads != 0:
            raise ConfigError("d_model must be divisible by heads")
        return self

    @property
    def final_len(self) -> int:
        n = self.input_len
        for _ in range(self.levels):
            n = (n + 1) // 2
        return n


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 3
    seed: int = 0
    loss_mode: str = "full"   # "full" | "masked"
    clip_norm: float = 5.0

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0 and self.learning_rate != 0.0:
            raise ConfigError("learning_rate must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.loss_mode not in ("full", "masked"):
            raise ConfigError(f"unknown loss mode {self.loss_mode!r}")
        return self


def _coerce(value: str, typ):
    if typ is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    return typ(value)


def to_text(cfg) -> str:
    return "".join(f"{f.name}={getattr(cfg, f.name)}\n" for f in fields(cfg))


def from_text(cls, text: str):
    known = {f.name: f.type for f in fields(cls)}
    types = {"int": int, "float": float, "bool": bool, "str": str}
    kwargs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ = known[key]
        if isinstance(typ, str):
            typ = types[typ]
        kwargs[key] = _coerce(value, typ)
    return cls(**kwargs).validate()


def load_mixed_config(path: str):
    """Read a key=value file holding both model and train settings."""
    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    model_lines, train_lines = [], []
    with open(path) as fh:
        for line in fh:
            stripped = line.split("#", 1)[0].strip()
            if not stripped or "=" not in stripped:
                continue
            key = stripped.split("=", 1)[0].strip()
            matched = False
            if key in model_keys:
                model_lines.append(stripped)
                matched = True
            if key in train_keys:
                train_lines.append(stripped)
                matched = True
            if not matched:
                raise ConfigError(f"unknown config key {key!r}")
    return (from_text(ModelConfig, "\n".join(model_lines)),
            from_text(TrainConfig, "\n".join(train_lines)))
