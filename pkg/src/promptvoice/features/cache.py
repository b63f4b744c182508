"""Per-utterance feature cache.

One ``.npz`` container per utterance holding the mel spectrogram, pitch
track, and style statistics, stamped with a hash of the feature settings;
entries written under different feature settings are treated as missing.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from promptvoice.config import Config
from promptvoice.features.mel import MelSpectrogram
from promptvoice.features.pitch import PitchTrack
from promptvoice.features.stats import StyleStats


def _features_hash(config: Config) -> str:
    # Key on the feature section alone: model/training knobs don't change
    # the extracted features, and touching them must not invalidate a corpus.
    blob = json.dumps(dataclasses.asdict(config.features), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class FeatureCache:
    def __init__(self, cache_dir: str | Path, config: Config):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self._hash = _features_hash(config)

    def _path(self, utterance_id: str) -> Path:
        return self.cache_dir / f"{utterance_id}.npz"

    def put(
        self,
        utterance_id: str,
        mel: MelSpectrogram,
        pitch: PitchTrack,
        stats: StyleStats,
    ) -> Path:
        path = self._path(utterance_id)
        np.savez(
            path,
            mel=mel.values,
            log_f0=pitch.log_f0,
            vuv=pitch.vuv,
            stats=json.dumps(stats.to_dict()),
            config_hash=self._hash,
        )
        return path

    def get(self, utterance_id: str) -> tuple[MelSpectrogram, PitchTrack, StyleStats] | None:
        path = self._path(utterance_id)
        if not path.is_file():
            return None
        with np.load(path, allow_pickle=False) as data:
            if str(data["config_hash"]) != self._hash:
                return None
            mel = MelSpectrogram(
                values=data["mel"],
                hop_seconds=self.config.features.hop_seconds,
                window_seconds=self.config.features.window_ms / 1000.0,
            )
            pitch = PitchTrack(log_f0=data["log_f0"], vuv=data["vuv"])
            stats = StyleStats.from_dict(json.loads(str(data["stats"])))
        return mel, pitch, stats

    def has(self, utterance_id: str) -> bool:
        return self.get(utterance_id) is not None
