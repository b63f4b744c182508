"""Iterative mel-spectrogram inversion (Griffin-Lim).

This is a LOW-FIDELITY fallback so synthesized mels can be auditioned
without a neural vocoder: the mel filterbank is pseudo-inverted and phase
is recovered by Griffin-Lim iterations.  Perceptual quality claims require
an external neural vocoder, which is out of scope here.
"""

from __future__ import annotations

import numpy as np

from promptvoice.config import FeatureConfig
from promptvoice.features.mel import frame_signal, mel_filterbank


def _stft(waveform: np.ndarray, config: FeatureConfig) -> np.ndarray:
    frames = frame_signal(waveform, config.hop_samples, config.window_samples)
    window = np.hanning(config.window_samples)
    return np.fft.rfft(frames * window, n=config.fft_size, axis=1)  # [T, F]


def _istft(spec: np.ndarray, config: FeatureConfig, num_samples: int) -> np.ndarray:
    hop, win = config.hop_samples, config.window_samples
    window = np.hanning(win)
    frames = np.fft.irfft(spec, n=config.fft_size, axis=1)[:, :win]
    out = np.zeros(hop * spec.shape[0] + win)
    norm = np.zeros_like(out)
    for i in range(spec.shape[0]):
        start = i * hop
        out[start : start + win] += frames[i] * window
        norm[start : start + win] += window**2
    out = out / np.maximum(norm, 1e-8)
    return out[:num_samples]


def griffin_lim(
    magnitude: np.ndarray,
    config: FeatureConfig,
    iterations: int = 60,
    seed: int = 0,
) -> np.ndarray:
    """Phase recovery from a linear magnitude spectrogram [T, fft//2+1]."""
    if magnitude.ndim != 2 or magnitude.shape[1] != config.fft_size // 2 + 1:
        raise ValueError(
            f"expected [frames, {config.fft_size // 2 + 1}] magnitudes, "
            f"got {magnitude.shape}"
        )
    rng = np.random.default_rng(seed)
    num_samples = magnitude.shape[0] * config.hop_samples
    phase = np.exp(2j * np.pi * rng.random(magnitude.shape))
    spec = magnitude * phase
    for _ in range(iterations):
        wave = _istft(spec, config, num_samples)
        rebuilt = _stft(wave, config)[: magnitude.shape[0]]
        phase = rebuilt / np.maximum(np.abs(rebuilt), 1e-8)
        spec = magnitude * phase
    wave = _istft(spec, config, num_samples)
    peak = np.abs(wave).max()
    if peak > 1.0:
        wave = wave / peak
    return wave.astype(np.float32)


def mel_to_waveform(
    log_mel: np.ndarray,
    config: FeatureConfig,
    iterations: int = 60,
    seed: int = 0,
) -> np.ndarray:
    """Invert a log-mel matrix [T, mel_bins] to a waveform (low fidelity)."""
    mel_mag = np.exp(np.asarray(log_mel, dtype=np.float64))
    fb = mel_filterbank(
        config.sample_rate_hz,
        config.fft_size,
        mel_mag.shape[1],
        config.fmin_hz,
        config.fmax_hz,
    )  # [bins, fft//2+1]
    linear = np.maximum(np.linalg.pinv(fb) @ mel_mag.T, 0.0).T  # [T, F]
    return griffin_lim(linear, config, iterations=iterations, seed=seed)
