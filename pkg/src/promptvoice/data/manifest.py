"""Dataset manifests and speaker prompt annotations.

A manifest is a JSONL file, one utterance per line, with the exact field
names of :class:`UtteranceRecord`.  Speaker prompt annotations live in a
separate JSONL file keyed by ``speaker_id``; records without an annotation
are still trainable (the style prompt alone is used for them).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

GENDERS = ("female", "male")

# Controlled vocabulary for speaker descriptor words.  Annotations may only
# use words from this set (or a caller-supplied replacement).
DEFAULT_DESCRIPTOR_VOCABULARY = frozenset(
    {
        "young",
        "old",
        "gender-neutral",
        "deep",
        "weak",
        "muffled",
        "raspy",
        "clear",
        "cool",
        "wild",
        "sweet",
        # extended set used by bundled annotations
        "soft",
        "adult-like",
        "bright",
        "husky",
        "warm",
        "nasal",
        "breathy",
        "tense",
        "calm",
        "childlike",
        "mature",
        "rough",
        "smooth",
        "light",
        "dark",
        "energetic",
        "relaxed",
        "powerful",
        "gentle",
        "crisp",
    }
)


class ManifestError(ValueError):
    """Malformed manifest or annotation content."""


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    audio_path: str
    text: str
    phonemes: tuple[str, ...]
    durations: tuple[int, ...]
    gender: str
    sample_rate_hz: int = 24000

    def __post_init__(self):
        if len(self.phonemes) != len(self.durations):
            raise ManifestError(
                f"{self.utterance_id}: length mismatch, {len(self.phonemes)} phonemes "
                f"vs {len(self.durations)} durations"
            )
        if any(d < 0 for d in self.durations):
            raise ManifestError(f"{self.utterance_id}: negative duration")
        if self.gender not in GENDERS:
            raise ManifestError(f"{self.utterance_id}: gender must be one of {GENDERS}")
        if self.sample_rate_hz <= 0:
            raise ManifestError(f"{self.utterance_id}: sample_rate_hz must be positive")

    @property
    def total_frames(self) -> int:
        return sum(self.durations)

    @property
    def is_trainable(self) -> bool:
        return self.total_frames > 0

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "speaker_id": self.speaker_id,
            "audio_path": self.audio_path,
            "text": self.text,
            "phonemes": list(self.phonemes),
            "durations": list(self.durations),
            "gender": self.gender,
            "sample_rate_hz": self.sample_rate_hz,
        }


@dataclass(frozen=True)
class SpeakerPromptAnnotation:
    speaker_id: str
    descriptor_words: frozenset[str]
    prompt_text: str
    vocabulary: frozenset[str] = field(
        default=DEFAULT_DESCRIPTOR_VOCABULARY, repr=False, compare=False
    )

    def __post_init__(self):
        unknown = self.descriptor_words - self.vocabulary
        if unknown:
            raise ManifestError(
                f"{self.speaker_id}: descriptor words outside vocabulary: {sorted(unknown)}"
            )
        if self.descriptor_words and not self.prompt_text.strip():
            raise ManifestError(f"{self.speaker_id}: empty prompt_text with descriptor words set")


_RECORD_FIELDS = {
    "utterance_id": str,
    "speaker_id": str,
    "audio_path": str,
    "text": str,
    "phonemes": list,
    "durations": list,
    "gender": str,
    "sample_rate_hz": int,
}


def _parse_record(obj: dict, where: str) -> UtteranceRecord:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = set(_RECORD_FIELDS) - {"sample_rate_hz"} - set(obj)
    if missing:
        raise ManifestError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = set(obj) - set(_RECORD_FIELDS)
    if unknown:
        raise ManifestError(f"{where}: unknown field(s) {sorted(unknown)}")
    for name, typ in _RECORD_FIELDS.items():
        if name in obj and not isinstance(obj[name], typ):
            raise ManifestError(f"{where}: field {name} must be {typ.__name__}")
    durations = obj["durations"]
    if not all(isinstance(d, int) and not isinstance(d, bool) for d in durations):
        raise ManifestError(f"{where}: durations must be integers")
    try:
        return UtteranceRecord(
            utterance_id=obj["utterance_id"],
            speaker_id=obj["speaker_id"],
            audio_path=obj["audio_path"],
            text=obj["text"],
            phonemes=tuple(str(p) for p in obj["phonemes"]),
            durations=tuple(durations),
            gender=obj["gender"],
            sample_rate_hz=obj.get("sample_rate_hz", 24000),
        )
    except ManifestError as exc:
        raise ManifestError(f"{where}: {exc}") from None


def load_manifest(path: str | Path) -> list[UtteranceRecord]:
    """Read a JSONL manifest; malformed lines are reported with line numbers."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON ({exc.msg})") from None
            records.append(_parse_record(obj, where))
    return records


def save_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=False) + "\n")


def load_speaker_prompts(
    path: str | Path, vocabulary: frozenset[str] | None = None
) -> dict[str, SpeakerPromptAnnotation]:
    """Read speaker prompt annotations keyed by speaker_id."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"speaker prompt file not found: {path}")
    vocabulary = vocabulary or DEFAULT_DESCRIPTOR_VOCABULARY
    annotations: dict[str, SpeakerPromptAnnotation] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON ({exc.msg})") from None
            for name in ("speaker_id", "descriptor_words", "prompt_text"):
                if name not in obj:
                    raise ManifestError(f"{where}: missing field {name}")
            if obj["speaker_id"] in annotations:
                raise ManifestError(f"{where}: duplicate speaker_id {obj['speaker_id']}")
            try:
                ann = SpeakerPromptAnnotation(
                    speaker_id=str(obj["speaker_id"]),
                    descriptor_words=frozenset(str(w) for w in obj["descriptor_words"]),
                    prompt_text=str(obj["prompt_text"]),
                    vocabulary=vocabulary,
                )
            except ManifestError as exc:
                raise ManifestError(f"{where}: {exc}") from None
            annotations[ann.speaker_id] = ann
    return annotations


def save_speaker_prompts(
    annotations: Iterable[SpeakerPromptAnnotation], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(
                json.dumps(
                    {
                        "speaker_id": ann.speaker_id,
                        "descriptor_words": sorted(ann.descriptor_words),
                        "prompt_text": ann.prompt_text,
                    }
                )
                + "\n"
            )
