"""Corpus preparation: waveform loading, feature extraction into the cache,
style statistics artifacts, level assignments, and training-example assembly.

Artifact flow: manifest (+ alignments) -> feature cache + stats.jsonl ->
thresholds.json + levels.jsonl -> training examples.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.io import wavfile

from promptvoice.config import Config
from promptvoice.data.alignment import load_alignment
from promptvoice.data.manifest import SpeakerPromptAnnotation, UtteranceRecord
from promptvoice.features.cache import FeatureCache
from promptvoice.features.mel import compute_logmel
from promptvoice.features.pitch import extract_pitch
from promptvoice.features.stats import StyleStats, utterance_stats
from promptvoice.model.vocab import PhonemeVocabulary
from promptvoice.prompts.thresholds import StyleLevels, ThresholdTable, assign_levels
from promptvoice.train.loop import TrainingExample

logger = logging.getLogger(__name__)


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class StatsRow:
    """Per-utterance style statistics plus the keys needed for binning."""

    utterance_id: str
    speaker_id: str
    gender: str
    stats: StyleStats

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "speaker_id": self.speaker_id,
            "gender": self.gender,
            **self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StatsRow":
        return cls(
            utterance_id=obj["utterance_id"],
            speaker_id=obj["speaker_id"],
            gender=obj["gender"],
            stats=StyleStats.from_dict(obj),
        )


def decode_waveform(source, expected_rate: int, label: str = "<wav>") -> np.ndarray:
    """Decode mono WAV data (path or file-like) to float32 in [-1, 1]."""
    rate, data = wavfile.read(source)
    if rate != expected_rate:
        raise DatasetError(f"{label}: sample rate {rate} != declared {expected_rate}")
    if data.ndim != 1:
        raise DatasetError(f"{label}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        return data.astype(np.float32) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float32) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float32)
    raise DatasetError(f"{label}: unsupported sample format {data.dtype}")


def load_waveform(path: str | Path, expected_rate: int) -> np.ndarray:
    """Read a mono WAV file as float32 in [-1, 1], verifying the sample rate."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"audio not found: {path}")
    return decode_waveform(path, expected_rate, label=str(path))


def attach_durations(
    records: Sequence[UtteranceRecord],
    alignment_dir: str | Path,
    config: Config,
    audio_root: str | Path | None = None,
) -> list[UtteranceRecord]:
    """Fill phones/durations from ``<alignment_dir>/<utterance_id>.lab`` files.

    The frame totals are reconciled to the true audio duration so they match
    the mel frame count exactly.
    """
    alignment_dir = Path(alignment_dir)
    root = Path(audio_root) if audio_root is not None else Path(".")
    out = []
    for rec in records:
        wav = load_waveform(root / rec.audio_path, rec.sample_rate_hz)
        total_seconds = wav.size / rec.sample_rate_hz
        phones, durations = load_alignment(
            alignment_dir / f"{rec.utterance_id}.lab",
            config.features.hop_seconds,
            total_seconds=total_seconds,
        )
        out.append(
            UtteranceRecord(
                utterance_id=rec.utterance_id,
                speaker_id=rec.speaker_id,
                audio_path=rec.audio_path,
                text=rec.text,
                phonemes=tuple(phones),
                durations=tuple(durations),
                gender=rec.gender,
                sample_rate_hz=rec.sample_rate_hz,
            )
        )
    return out


def extract_features(
    records: Sequence[UtteranceRecord],
    config: Config,
    cache: FeatureCache,
    audio_root: str | Path | None = None,
) -> list[StatsRow]:
    """Compute mel/pitch/stats for every record and fill the cache.

    Existing cache entries written under the same config are reused.
    """
    root = Path(audio_root) if audio_root is not None else Path(".")
    rows = []
    for rec in records:
        cached = cache.get(rec.utterance_id)
        if cached is not None:
            mel, pitch, stats = cached
        else:
            wav = load_waveform(root / rec.audio_path, rec.sample_rate_hz)
            if rec.sample_rate_hz != config.features.sample_rate_hz:
                raise DatasetError(
                    f"{rec.utterance_id}: record rate {rec.sample_rate_hz} != "
                    f"configured {config.features.sample_rate_hz}"
                )
            mel = compute_logmel(wav, config.features)
            pitch = extract_pitch(wav, config.features)
            stats = utterance_stats(pitch, rec, wav, config.features)
            cache.put(rec.utterance_id, mel, pitch, stats)
        if rec.total_frames != mel.values.shape[0]:
            raise DatasetError(
                f"{rec.utterance_id}: manifest durations total {rec.total_frames} "
                f"frames but the mel has {mel.values.shape[0]}; re-run alignment "
                "ingestion against the audio"
            )
        rows.append(
            StatsRow(
                utterance_id=rec.utterance_id,
                speaker_id=rec.speaker_id,
                gender=rec.gender,
                stats=stats,
            )
        )
    return rows


def save_stats(rows: Iterable[StatsRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict()) + "\n")


def load_stats(path: str | Path) -> list[StatsRow]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"stats file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(StatsRow.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DatasetError(f"{path.name}:{lineno}: malformed stats row ({exc})") from None
    return rows


def assign_corpus_levels(
    rows: Sequence[StatsRow], table: ThresholdTable
) -> dict[str, StyleLevels]:
    return {
        row.utterance_id: assign_levels(row.stats, row.gender, table) for row in rows
    }


def save_levels(levels: Mapping[str, StyleLevels], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for uid in sorted(levels):
            fh.write(json.dumps({"utterance_id": uid, **levels[uid].to_dict()}) + "\n")


def load_levels(path: str | Path) -> dict[str, StyleLevels]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"levels file not found: {path}")
    levels = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            levels[obj["utterance_id"]] = StyleLevels.from_dict(obj)
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DatasetError(f"{path.name}:{lineno}: malformed level row ({exc})") from None
    return levels


def build_vocabulary(records: Iterable[UtteranceRecord]) -> PhonemeVocabulary:
    symbols = set()
    for rec in records:
        symbols.update(rec.phonemes)
    if not symbols:
        raise DatasetError("no phonemes found in the manifest")
    return PhonemeVocabulary(symbols)


def build_training_examples(
    records: Sequence[UtteranceRecord],
    cache: FeatureCache,
    levels: Mapping[str, StyleLevels],
    speaker_prompts: Mapping[str, SpeakerPromptAnnotation] | None,
    vocab: PhonemeVocabulary,
) -> list[TrainingExample]:
    """Materialize features and labels for training.

    Records missing a speaker-prompt annotation train with the style prompt
    alone; records missing cached features or level assignments are errors.
    """
    examples = []
    skipped = 0
    for rec in records:
        if not rec.is_trainable:
            skipped += 1
            continue
        cached = cache.get(rec.utterance_id)
        if cached is None:
            raise DatasetError(
                f"{rec.utterance_id}: features not cached; run data preparation first"
            )
        mel, pitch, _ = cached
        if rec.utterance_id not in levels:
            raise DatasetError(f"{rec.utterance_id}: no style-level assignment")
        annotation = speaker_prompts.get(rec.speaker_id) if speaker_prompts else None
        examples.append(
            TrainingExample(
                utterance_id=rec.utterance_id,
                speaker_id=rec.speaker_id,
                gender=rec.gender,
                phoneme_ids=vocab.encode(rec.phonemes).numpy(),
                durations=np.asarray(rec.durations, dtype=np.int64),
                mel=mel.values,
                log_f0=pitch.log_f0,
                vuv=pitch.vuv,
                levels=levels[rec.utterance_id],
                speaker_prompt=annotation.prompt_text if annotation else None,
            )
        )
    if skipped:
        logger.warning("skipped %d untrainable record(s) with zero total frames", skipped)
    if not examples:
        raise DatasetError("no trainable records")
    return examples
