"""Typed configuration with corpus-scale defaults.

Every knob of the pipeline lives here.  Defaults reproduce the full-scale
recipe (80-bin mels at 10/40 ms framing, 10-token/256-dim/4-head reference
encoder, 10-component style mixture, 4-component duration mixture, 20-layer
diffusion decoder with 100 steps, warmup-4000 schedule at base LR 1e-3,
30k-frame batches).  Small-scale runs override fields via a YAML document;
unknown keys and out-of-range values are rejected at load time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for unknown keys, type mismatches, or invalid values."""


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate_hz: int = 24000
    mel_bins: int = 80
    hop_ms: float = 10.0
    window_ms: float = 40.0
    fft_size: int = 1024
    fmin_hz: float = 0.0
    fmax_hz: float = 12000.0
    log_floor: float = 1e-5
    f0_min_hz: float = 65.0
    f0_max_hz: float = 400.0
    voicing_threshold: float = 0.55
    energy_floor: float = 0.01  # frame RMS gate, relative to the utterance peak frame RMS
    default_log_f0: float = 5.0  # fill value when an utterance is fully unvoiced

    @property
    def hop_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.hop_ms / 1000.0))

    @property
    def window_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.window_ms / 1000.0))

    @property
    def hop_seconds(self) -> float:
        return self.hop_ms / 1000.0


@dataclass(frozen=True)
class ReferenceEncoderConfig:
    conv_channels: tuple[int, ...] = (128, 128, 256, 256, 512, 512)
    gru_hidden: int = 256
    num_tokens: int = 10
    embed_dim: int = 256
    attention_heads: int = 4


@dataclass(frozen=True)
class PromptEncoderConfig:
    backbone: str = "mock"  # "mock" or "pretrained:<model-name>"
    backbone_dim: int = 256  # mock backbone width; pretrained adapters override
    max_tokens: int = 512
    hidden_dim: int = 256
    num_mixtures: int = 10
    scale_floor: float = 1e-4
    use_mdn: bool = True


@dataclass(frozen=True)
class AcousticConfig:
    hidden_dim: int = 256
    conformer_blocks: int = 4
    conformer_heads: int = 2
    conformer_kernel: int = 7
    conformer_ff_mult: int = 4
    dropout: float = 0.1
    predictor_channels: int = 256
    predictor_kernel: int = 3
    predictor_dropout: float = 0.5
    duration_mixtures: int = 4
    decoder_layers: int = 20
    decoder_channels: int = 256
    diffusion_steps: int = 100
    beta_min: float = 1e-4
    beta_max: float = 0.06


@dataclass(frozen=True)
class TrainingConfig:
    base_lr: float = 0.001
    warmup_steps: int = 4000
    weight_decay: float = 0.01
    max_frames_per_batch: int = 30000
    epochs: int = 100
    max_steps: int = 0  # 0 = no cap beyond epochs
    checkpoint_every: int = 1000
    seed: int = 2024
    validation_speaker_fraction: float = 0.02
    use_speaker_prompt: bool = True
    loss_weight_decoder: float = 1.0
    loss_weight_duration: float = 1.0
    loss_weight_pitch: float = 1.0
    loss_weight_style: float = 1.0


@dataclass(frozen=True)
class DataConfig:
    data_dir: str = "data"
    cache_dir: str = "cache"
    checkpoint_dir: str = "checkpoints"


@dataclass(frozen=True)
class Config:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    reference_encoder: ReferenceEncoderConfig = field(default_factory=ReferenceEncoderConfig)
    prompt_encoder: PromptEncoderConfig = field(default_factory=PromptEncoderConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Stable digest of the resolved config, used to key feature caches."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# Fields that are allowed to be zero or otherwise exempt from the
# "strictly positive" rule applied to numeric hyperparameters.
_NON_POSITIVE_OK = {
    ("features", "fmin_hz"),
    ("acoustic", "dropout"),
    ("acoustic", "predictor_dropout"),
    ("training", "max_steps"),
    ("training", "weight_decay"),
    ("training", "checkpoint_every"),  # 0 disables periodic checkpoints
    ("training", "validation_speaker_fraction"),  # 0 trains on every speaker
    ("training", "loss_weight_decoder"),
    ("training", "loss_weight_duration"),
    ("training", "loss_weight_pitch"),
    ("training", "loss_weight_style"),
}

_SECTION_TYPES = {
    "features": FeatureConfig,
    "reference_encoder": ReferenceEncoderConfig,
    "prompt_encoder": PromptEncoderConfig,
    "acoustic": AcousticConfig,
    "training": TrainingConfig,
    "data": DataConfig,
}


def _coerce(section: str, f: dataclasses.Field, value: Any) -> Any:
    name = f.name
    if f.type in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{name}: expected int, got {value!r}")
        return value
    if f.type in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{name}: expected number, got {value!r}")
        return float(value)
    if f.type in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{name}: expected bool, got {value!r}")
        return value
    if f.type in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{name}: expected string, got {value!r}")
        return value
    if "tuple" in str(f.type):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{section}.{name}: expected list of ints, got {value!r}")
        return tuple(value)
    raise ConfigError(f"{section}.{name}: unsupported field type {f.type!r}")


def _validate_section(section: str, obj: Any) -> None:
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, bool) or isinstance(value, str):
            continue
        if isinstance(value, tuple):
            if any(v <= 0 for v in value):
                raise ConfigError(f"{section}.{f.name}: entries must be positive, got {value}")
            continue
        if isinstance(value, (int, float)):
            if (section, f.name) in _NON_POSITIVE_OK:
                if value < 0:
                    raise ConfigError(f"{section}.{f.name}: must be >= 0, got {value}")
            elif value <= 0:
                raise ConfigError(f"{section}.{f.name}: must be positive, got {value}")


def resolve_config(document: dict[str, Any] | None) -> Config:
    """Fill a (possibly partial) config document with defaults and validate.

    Resolution is idempotent: feeding the dict form of a resolved Config back
    in returns an equal Config.
    """
    document = document or {}
    if not isinstance(document, dict):
        raise ConfigError(f"config document must be a mapping, got {type(document).__name__}")
    unknown = set(document) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    sections: dict[str, Any] = {}
    for section, cls in _SECTION_TYPES.items():
        overrides = document.get(section, {})
        if not isinstance(overrides, dict):
            raise ConfigError(f"{section}: expected a mapping, got {overrides!r}")
        known = {f.name: f for f in dataclasses.fields(cls)}
        bad = set(overrides) - set(known)
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {sorted(bad)}")
        kwargs = {
            name: _coerce(section, known[name], value) for name, value in overrides.items()
        }
        obj = cls(**kwargs)
        _validate_section(section, obj)
        sections[section] = obj

    if sections["features"].f0_min_hz >= sections["features"].f0_max_hz:
        raise ConfigError("features: f0_min_hz must be below f0_max_hz")
    if sections["acoustic"].beta_min >= sections["acoustic"].beta_max:
        raise ConfigError("acoustic: beta_min must be below beta_max")
    if sections["training"].validation_speaker_fraction >= 1.0:
        raise ConfigError("training: validation_speaker_fraction must be below 1")
    return Config(**sections)


def load_config(path: str | Path | None) -> Config:
    """Load a YAML config document; missing keys fall back to defaults."""
    if path is None:
        return resolve_config({})
    text = Path(path).read_text(encoding="utf-8")
    document = yaml.safe_load(text)
    if document is None:
        document = {}
    return resolve_config(document)


def save_config(config: Config, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(config.to_dict(), sort_keys=False), encoding="utf-8"
    )
