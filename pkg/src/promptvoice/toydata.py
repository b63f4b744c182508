"""Synthetic four-speaker corpus for desk-scale experiments.

Two speakers per gender.  Within a gender both speakers draw pitch,
speaking rate, and loudness from the same distributions and differ only in
spectral tilt (harmonic rolloff), i.e. in timbre.  Style prompts derived
from the statistics therefore carry no within-gender speaker identity;
only the per-speaker prompts do.  That separation is what the
prompt-ablation experiments measure.

Vowel pseudo-phones are rendered as harmonic complexes with a per-speaker
rolloff exponent, consonants as shaped noise bursts, and word boundaries as
near-silence.  Alignments are exact by construction.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from promptvoice.config import Config, resolve_config
from promptvoice.data.manifest import (
    SpeakerPromptAnnotation,
    UtteranceRecord,
    save_manifest,
    save_speaker_prompts,
)
from promptvoice.dataset import attach_durations
from promptvoice.frontend import SILENCE_PHONE, VOWELS, text_to_phonemes


@dataclass(frozen=True)
class ToySpeaker:
    speaker_id: str
    gender: str
    rolloff: float  # harmonic amplitude exponent: a_k = k ** -rolloff
    descriptor_words: frozenset[str]
    prompt_text: str


TOY_SPEAKERS = (
    ToySpeaker(
        "spk_f1", "female", 0.4,
        frozenset({"clear", "bright"}), "A clear, bright voice.",
    ),
    ToySpeaker(
        "spk_f2", "female", 1.8,
        frozenset({"muffled", "dark"}), "A muffled, dark voice.",
    ),
    ToySpeaker(
        "spk_m1", "male", 0.4,
        frozenset({"crisp", "light"}), "A crisp, light voice.",
    ),
    ToySpeaker(
        "spk_m2", "male", 1.8,
        frozenset({"deep", "husky"}), "A deep, husky voice.",
    ),
)

_GENDER_F0 = {"female": 220.0, "male": 120.0}
_WORDS = (
    "bada", "kupi", "mola", "tine", "sagu", "remo",
    "pilo", "vasu", "doke", "nami", "fegu", "lora",
)


@dataclass
class ToyCorpus:
    root: Path
    manifest_path: Path
    audio_dir: Path
    alignments_dir: Path
    speaker_prompts_path: Path
    records: list[UtteranceRecord]


def toy_config() -> Config:
    """Small-model overrides used by the bundled toy experiments."""
    return resolve_config(
        {
            "reference_encoder": {
                "conv_channels": [32, 32, 64],
                "gru_hidden": 64,
                "embed_dim": 64,
                "num_tokens": 10,
                "attention_heads": 4,
            },
            "prompt_encoder": {"backbone_dim": 64, "hidden_dim": 64},
            "acoustic": {
                "hidden_dim": 64,
                "conformer_blocks": 2,
                "conformer_heads": 2,
                "conformer_kernel": 7,
                "predictor_channels": 64,
                "decoder_layers": 4,
                "decoder_channels": 64,
                "diffusion_steps": 10,
                "dropout": 0.0,
                "predictor_dropout": 0.0,
            },
            "training": {
                "base_lr": 0.004,
                "warmup_steps": 30,
                "max_frames_per_batch": 1500,
                "epochs": 1000,
                "max_steps": 200,
                "checkpoint_every": 0,
                "validation_speaker_fraction": 0.0,
            },
        }
    )


def _phone_seconds(phone: str, rate_scale: float, rng: random.Random) -> float:
    if phone == SILENCE_PHONE:
        return 0.08
    base = rng.uniform(0.09, 0.14) if phone in VOWELS else rng.uniform(0.05, 0.08)
    return base / rate_scale


def _render_phone(
    phone: str,
    n_samples: int,
    sample_rate: int,
    f0: float,
    rolloff: float,
    rng: np.random.Generator,
) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    if phone == SILENCE_PHONE:
        return 1e-4 * rng.standard_normal(n_samples)
    if phone in VOWELS:
        # Harmonic complex; the rolloff exponent is the only timbre knob.
        max_harmonic = min(14, int((sample_rate / 2 - 200.0) / f0))
        wave = np.zeros(n_samples)
        for k in range(1, max_harmonic + 1):
            amp = k ** -rolloff
            phase = rng.uniform(0.0, 2.0 * math.pi)
            wave += amp * np.sin(2.0 * math.pi * k * f0 * t + phase)
        # RMS-normalize so loudness is independent of the rolloff (tilt must
        # be the only speaker cue within a gender).
        rms = float(np.sqrt(np.mean(wave**2)))
        wave *= 0.12 / max(rms, 1e-9)
    else:
        # Unvoiced: first-difference noise (high-pass, no pitch periodicity).
        noise = rng.standard_normal(n_samples + 1)
        wave = 0.05 * np.diff(noise)
    ramp = min(int(0.005 * sample_rate), n_samples // 2)
    if ramp > 0:
        env = np.ones(n_samples)
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
        wave = wave * env
    return wave


def _make_text(rng: random.Random) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(2, 4)))


def make_toy_corpus(
    out_dir: str | Path,
    config: Config | None = None,
    utterances_per_speaker: int = 10,
    seed: int = 2024,
) -> ToyCorpus:
    """Write WAVs, alignments, a manifest, and speaker prompts under ``out_dir``."""
    config = config if config is not None else toy_config()
    sample_rate = config.features.sample_rate_hz
    root = Path(out_dir)
    audio_dir = root / "wav"
    align_dir = root / "alignments"
    audio_dir.mkdir(parents=True, exist_ok=True)
    align_dir.mkdir(parents=True, exist_ok=True)

    text_rng = random.Random(seed)
    records: list[UtteranceRecord] = []
    for speaker in TOY_SPEAKERS:
        for idx in range(utterances_per_speaker):
            utterance_id = f"{speaker.speaker_id}_{idx:03d}"
            rng = random.Random(f"{seed}:{utterance_id}")
            digest = hashlib.blake2b(
                f"{seed}:{utterance_id}".encode("utf-8"), digest_size=8
            ).digest()
            np_rng = np.random.default_rng(int.from_bytes(digest, "little"))
            text = _make_text(text_rng)
            phones = text_to_phonemes(text)

            # Per-utterance prosody drawn from gender-level (not speaker-level)
            # distributions, so within-gender statistics overlap.
            f0 = _GENDER_F0[speaker.gender] * rng.uniform(0.93, 1.07)
            rate_scale = rng.uniform(0.9, 1.1)
            loudness = rng.uniform(0.7, 1.0)

            pieces = []
            lab_lines = []
            cursor = 0
            for phone in phones:
                n = int(round(_phone_seconds(phone, rate_scale, rng) * sample_rate))
                pieces.append(
                    _render_phone(phone, n, sample_rate, f0, speaker.rolloff, np_rng)
                )
                lab_lines.append(
                    f"{phone} {cursor / sample_rate:.9f} {(cursor + n) / sample_rate:.9f}"
                )
                cursor += n
            waveform = loudness * np.concatenate(pieces)

            wav_path = audio_dir / f"{utterance_id}.wav"
            wavfile.write(
                wav_path, sample_rate, np.round(waveform * 32767).astype(np.int16)
            )
            (align_dir / f"{utterance_id}.lab").write_text(
                "\n".join(lab_lines) + "\n", encoding="utf-8"
            )
            records.append(
                UtteranceRecord(
                    utterance_id=utterance_id,
                    speaker_id=speaker.speaker_id,
                    audio_path=str(wav_path.relative_to(root)),
                    text=text,
                    phonemes=(),
                    durations=(),
                    gender=speaker.gender,
                    sample_rate_hz=sample_rate,
                )
            )

    records = attach_durations(records, align_dir, config, audio_root=root)
    manifest_path = root / "manifest.jsonl"
    save_manifest(records, manifest_path)
    prompts_path = root / "speaker_prompts.jsonl"
    save_speaker_prompts(
        [
            SpeakerPromptAnnotation(
                speaker_id=s.speaker_id,
                descriptor_words=s.descriptor_words,
                prompt_text=s.prompt_text,
            )
            for s in TOY_SPEAKERS
        ],
        prompts_path,
    )
    return ToyCorpus(
        root=root,
        manifest_path=manifest_path,
        audio_dir=audio_dir,
        alignments_dir=align_dir,
        speaker_prompts_path=prompts_path,
        records=records,
    )
