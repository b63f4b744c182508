"""Per-utterance style statistics: pitch, speaking rate, loudness.

These feed the three-level pseudo style prompts.  Loudness is the mean of
per-frame RMS in dB relative to full scale, speaking rate is non-silence
phones per second of audio, and mean F0 is taken over voiced frames only
(NaN when the utterance has no voiced frame; such utterances are excluded
from pitch statistics downstream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from promptvoice.config import FeatureConfig
from promptvoice.data.manifest import UtteranceRecord
from promptvoice.features.mel import frame_signal
from promptvoice.features.pitch import PitchTrack

SILENCE_PHONES = frozenset({"sil", "sp", "spn", "pau", ""})

_RMS_DB_FLOOR = 1e-5


@dataclass(frozen=True)
class StyleStats:
    mean_f0_hz: float  # NaN when fully unvoiced
    speaking_rate: float  # non-silence phones per second
    loudness_db: float

    @property
    def has_pitch(self) -> bool:
        return not math.isnan(self.mean_f0_hz)

    def to_dict(self) -> dict:
        return {
            "mean_f0_hz": self.mean_f0_hz,
            "speaking_rate": self.speaking_rate,
            "loudness_db": self.loudness_db,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StyleStats":
        return cls(
            mean_f0_hz=float(obj["mean_f0_hz"]),
            speaking_rate=float(obj["speaking_rate"]),
            loudness_db=float(obj["loudness_db"]),
        )


def utterance_stats(
    pitch: PitchTrack,
    record: UtteranceRecord,
    waveform: np.ndarray,
    config: FeatureConfig,
) -> StyleStats:
    waveform = np.asarray(waveform, dtype=np.float64)
    seconds = waveform.size / config.sample_rate_hz
    if seconds <= 0:
        raise ValueError(f"{record.utterance_id}: zero-duration utterance")

    voiced = pitch.vuv.astype(bool)
    if voiced.any():
        mean_f0 = float(np.exp(pitch.log_f0[voiced].astype(np.float64)).mean())
    else:
        mean_f0 = float("nan")

    spoken = sum(1 for p in record.phonemes if p.lower() not in SILENCE_PHONES)
    rate = spoken / seconds

    frames = frame_signal(waveform, config.hop_samples, config.window_samples)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    loudness = float(np.mean(20.0 * np.log10(np.maximum(rms, _RMS_DB_FLOOR))))

    return StyleStats(mean_f0_hz=mean_f0, speaking_rate=rate, loudness_db=loudness)
