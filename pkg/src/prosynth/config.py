"""Training configuration, model-scale presets, and the plain-text
key = value config file format."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .context import AGGREGATION_MODES
from .decoder import DecoderConfig
from .encoder import EncoderConfig

PRESETS = ("toy", "paper")


class ConfigError(ValueError):
    pass


@dataclass
class TrainingConfig:
    aggregation_mode: str = "none"
    preset: str = "toy"
    learning_rate: float = 1e-3
    warmup_steps: int = 0
    grad_clip_norm: float = 1.0
    batch_size: int = 2
    max_steps: int = 2000
    seed: int = 0
    checkpoint_interval: int = 500
    reduction_factor: int = 0  # 0 = preset default

    def __post_init__(self):
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise ConfigError(f"aggregation_mode must be one of {AGGREGATION_MODES}, "
                              f"got {self.aggregation_mode!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ConfigError("batch_size and max_steps must be >= 1")


def encoder_config(preset, vocab_size):
    if preset == "paper":
        return EncoderConfig(vocab_size=vocab_size, num_blocks=6, num_heads=8,
                             model_dim=512, ffn_inner_dim=2048)
    if preset == "toy":
        return EncoderConfig(vocab_size=vocab_size, num_blocks=2, num_heads=4,
                             model_dim=64, ffn_inner_dim=128)
    raise ConfigError(f"unknown preset {preset!r}")


def decoder_config(preset, reduction_factor=0):
    if preset == "paper":
        return DecoderConfig(num_mels=80, prenet_dims=(256, 256),
                             recurrent_dims=(1024, 1024),
                             reduction_factor=reduction_factor or 1,
                             postnet_channels=512, max_steps=1000)
    if preset == "toy":
        return DecoderConfig(num_mels=80, prenet_dims=(64, 64),
                             recurrent_dims=(128, 128),
                             reduction_factor=reduction_factor or 2,
                             postnet_channels=64, max_steps=80,
                             attention_init_shift=0.5)
    raise ConfigError(f"unknown preset {preset!r}")


def parse_config_file(path):
    """`key = value` per line; '#' starts a comment; blank lines ignored."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{line_no}: empty key")
            values[key] = value
    return values


def training_config_from(file_values=None, overrides=None):
    """Build a TrainingConfig from file values with CLI overrides on top."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    # Optimizer defaults follow the preset when not set explicitly.
    if str(merged.get("preset", "toy")) == "paper":
        merged.setdefault("learning_rate", 1e-4)
        merged.setdefault("warmup_steps", 4000)
    kwargs = {}
    field_types = {f.name: f.type for f in fields(TrainingConfig)}
    for key, value in merged.items():
        if key not in field_types:
            raise ConfigError(f"unknown config key {key!r}")
        target = field_types[key]
        try:
            if target == "int":
                kwargs[key] = int(value)
            elif target == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return TrainingConfig(**kwargs)
