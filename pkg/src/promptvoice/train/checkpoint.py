"""Checkpoint serialization, mel normalization stats, and RNG capture.

A checkpoint is a single ``torch.save`` payload carrying every parameter
group, the optimizer moments, the diffusion schedule, corpus mel
normalization stats, the resolved config (plus hash), the phoneme
vocabulary, the text-backbone identifier, and all RNG states needed for
bit-identical resume.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import torch

from promptvoice.config import Config, resolve_config

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class MelStats:
    """Per-bin corpus mean/std for mel normalization before diffusion."""

    mean: np.ndarray  # [bins]
    std: np.ndarray  # [bins]

    @classmethod
    def from_mels(cls, mels: Iterable[np.ndarray], std_floor: float = 1e-8) -> "MelStats":
        count = 0
        total = None
        total_sq = None
        for mel in mels:
            mel = np.asarray(mel, dtype=np.float64)
            if total is None:
                total = mel.sum(axis=0)
                total_sq = (mel ** 2).sum(axis=0)
            else:
                total += mel.sum(axis=0)
                total_sq += (mel ** 2).sum(axis=0)
            count += mel.shape[0]
        if count == 0:
            raise ValueError("no frames to compute mel statistics from")
        mean = total / count
        var = np.maximum(total_sq / count - mean ** 2, 0.0)
        std = np.maximum(np.sqrt(var), std_floor)
        return cls(mean=mean, std=std)

    def normalize(self, mel):
        if isinstance(mel, torch.Tensor):
            mean = torch.as_tensor(self.mean, dtype=mel.dtype, device=mel.device)
            std = torch.as_tensor(self.std, dtype=mel.dtype, device=mel.device)
            return (mel - mean) / std
        return (np.asarray(mel) - self.mean) / self.std

    def denormalize(self, mel):
        if isinstance(mel, torch.Tensor):
            mean = torch.as_tensor(self.mean, dtype=mel.dtype, device=mel.device)
            std = torch.as_tensor(self.std, dtype=mel.dtype, device=mel.device)
            return mel * std + mean
        return np.asarray(mel) * self.std + self.mean

    def to_dict(self) -> dict[str, list[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MelStats":
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
        )


def capture_rng_state() -> dict[str, Any]:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def restore_rng_state(state: dict[str, Any]) -> None:
    torch.set_rng_state(torch.as_tensor(state["torch"], dtype=torch.uint8))
    np.random.set_state(state["numpy"])
    random.setstate(state["python"])


def save_checkpoint(
    path: str | Path,
    *,
    model,
    optimizer,
    step: int,
    epoch: int,
    batch_index: int,
    config: Config,
    vocab,
    mel_stats: MelStats,
    rng: dict[str, Any] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "step": step,
        "epoch": epoch,
        "batch_index": batch_index,
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "vocab": vocab.to_dict(),
        "mel_stats": mel_stats.to_dict(),
        "schedule": model.schedule.state_dict(),
        "backbone": config.prompt_encoder.backbone,
        "rng": rng if rng is not None else capture_rng_state(),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    # Payloads carry numpy/python RNG states, so full unpickling is required;
    # checkpoints are trusted local artifacts.
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {payload.get('version')!r}"
        )
    return payload


def restore_model(path_or_payload) -> tuple[Any, Any, MelStats, Config]:
    """Rebuild (model, vocab, mel_stats, config) from a checkpoint.

    Imported lazily to keep this module free of a circular dependency on
    the model package at import time.
    """
    from promptvoice.model.full import PromptVoiceModel
    from promptvoice.model.vocab import PhonemeVocabulary

    payload = (
        path_or_payload
        if isinstance(path_or_payload, dict)
        else load_checkpoint(path_or_payload)
    )
    config = resolve_config(payload["config"])
    vocab = PhonemeVocabulary.from_dict(payload["vocab"])
    model = PromptVoiceModel(len(vocab), config)
    model.load_state_dict(payload["model"])
    model.eval()
    mel_stats = MelStats.from_dict(payload["mel_stats"])
    return model, vocab, mel_stats, config
