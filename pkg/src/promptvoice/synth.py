"""Synthesis entry points: prompt-driven and reference-driven.

Prompt path: compose the speaker/style prompt, embed it, read the style
mixture, draw (or take the argmax component of) a unit-norm style
embedding, then run the acoustic model.  Reference path: extract the style
embedding from reference speech with the reference encoder instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from promptvoice.config import Config
from promptvoice.dataset import load_waveform
from promptvoice.features.invert import mel_to_waveform
from promptvoice.features.mel import compute_logmel
from promptvoice.frontend import text_to_phonemes
from promptvoice.model.mdn import argmax_component_mean, mdn_sample
from promptvoice.model.vocab import PhonemeVocabulary
from promptvoice.prompts.templates import compose_prompt
from promptvoice.train.checkpoint import MelStats, restore_model

SAMPLING_MODES = ("sample", "argmax")


class SynthesisError(RuntimeError):
    pass


@dataclass
class ModelBundle:
    """A loaded checkpoint ready for inference."""

    model: object
    vocab: PhonemeVocabulary
    mel_stats: MelStats
    config: Config

    @classmethod
    def load(cls, checkpoint: str | Path) -> "ModelBundle":
        model, vocab, mel_stats, config = restore_model(checkpoint)
        return cls(model=model, vocab=vocab, mel_stats=mel_stats, config=config)


@dataclass
class SynthesisResult:
    mel: np.ndarray  # [T, bins], raw log-mel domain
    durations: np.ndarray  # [L] frames per phone
    log_f0: np.ndarray  # [T]
    vuv: np.ndarray  # [T] probabilities
    style_embedding: np.ndarray  # [E], unit norm
    prompt: str | None  # composed prompt (None on the reference path)
    phonemes: list[str]

    def waveform(self, config: Config, iterations: int = 60, seed: int = 0) -> np.ndarray:
        """Low-fidelity audition waveform via iterative spectral inversion."""
        return mel_to_waveform(self.mel, config.features, iterations=iterations, seed=seed)


def _encode_text(bundle: ModelBundle, text: str) -> tuple[list[str], torch.Tensor]:
    phones = text_to_phonemes(text)
    try:
        ids = bundle.vocab.encode(phones)
    except KeyError as exc:
        raise SynthesisError(f"text contains a phone unknown to the checkpoint: {exc}")
    return phones, ids


def style_from_prompt(
    bundle: ModelBundle,
    prompt: str,
    generator: torch.Generator,
    sampling: str = "sample",
    temperature: float = 1.0,
) -> torch.Tensor:
    """Unit-norm style embedding from a composed prompt string."""
    if sampling not in SAMPLING_MODES:
        raise SynthesisError(f"sampling mode must be one of {SAMPLING_MODES}")
    encoder = bundle.model.prompt_encoder
    with torch.no_grad():
        emb = encoder.embed([prompt])[0]
        if encoder.use_mdn:
            gmm = encoder.density(emb)
            if sampling == "argmax":
                return argmax_component_mean(gmm)
            return mdn_sample(gmm, generator=generator, temperature=temperature)
        vector = encoder.predict_vector(emb)
    return vector / vector.norm().clamp_min(1e-12)


def synthesize(
    bundle: ModelBundle,
    text: str,
    style_prompt: str,
    speaker_prompt: str | None = None,
    seed: int = 0,
    sampling: str = "sample",
    temperature: float = 1.0,
) -> SynthesisResult:
    """Generate a mel spectrogram from text plus natural-language prompts."""
    phones, ids = _encode_text(bundle, text)
    prompt = compose_prompt(speaker_prompt, style_prompt)
    generator = torch.Generator().manual_seed(seed)
    style = style_from_prompt(
        bundle, prompt, generator, sampling=sampling, temperature=temperature
    )
    out = bundle.model.synthesize(ids, style, generator=generator)
    mel = bundle.mel_stats.denormalize(out.mel.numpy())
    return SynthesisResult(
        mel=np.asarray(mel, dtype=np.float32),
        durations=out.durations.numpy(),
        log_f0=out.log_f0.numpy(),
        vuv=out.vuv.numpy(),
        style_embedding=style.detach().numpy(),
        prompt=prompt,
        phonemes=phones,
    )


def embed_reference(bundle: ModelBundle, waveform: np.ndarray) -> torch.Tensor:
    """Unit-norm style embedding from reference audio samples."""
    mel = compute_logmel(waveform, bundle.config.features)
    normed = torch.from_numpy(
        bundle.mel_stats.normalize(mel.values).astype(np.float32)
    )
    with torch.no_grad():
        bundle.model.eval()
        return bundle.model.encode_reference(normed.unsqueeze(0))[0]


def synthesize_from_reference(
    bundle: ModelBundle,
    text: str,
    reference: str | Path | np.ndarray,
    seed: int = 0,
) -> SynthesisResult:
    """Generate a mel spectrogram, taking the style from reference speech."""
    phones, ids = _encode_text(bundle, text)
    if isinstance(reference, (str, Path)):
        waveform = load_waveform(reference, bundle.config.features.sample_rate_hz)
    else:
        waveform = np.asarray(reference, dtype=np.float32)
    style = embed_reference(bundle, waveform)
    generator = torch.Generator().manual_seed(seed)
    out = bundle.model.synthesize(ids, style, generator=generator)
    mel = bundle.mel_stats.denormalize(out.mel.numpy())
    return SynthesisResult(
        mel=np.asarray(mel, dtype=np.float32),
        durations=out.durations.numpy(),
        log_f0=out.log_f0.numpy(),
        vuv=out.vuv.numpy(),
        style_embedding=style.detach().numpy(),
        prompt=None,
        phonemes=phones,
    )
