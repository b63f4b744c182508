"""Log-mel spectrogram extraction.

Framing is left-aligned: frame ``i`` covers samples ``[i*hop, i*hop+win)``
with zero padding past the end of the signal, so the frame count is always
``ceil(num_samples / hop)`` and shifting the input by one hop shifts the
frames by exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from promptvoice.config import FeatureConfig


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # [frames, mel_bins], log amplitude
    hop_seconds: float
    window_seconds: float

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def mel_bins(self) -> int:
        return self.values.shape[1]


def frame_signal(waveform: np.ndarray, hop: int, window: int) -> np.ndarray:
    """Slice a 1-D signal into [ceil(n/hop), window] frames, zero padded."""
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.ndim != 1 or waveform.size == 0:
        raise ValueError("waveform must be a non-empty 1-D array")
    n = waveform.size
    num_frames = math.ceil(n / hop)
    padded = np.pad(waveform, (0, (num_frames - 1) * hop + window - n))
    idx = np.arange(window)[None, :] + hop * np.arange(num_frames)[:, None]
    return padded[idx]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    sample_rate: int, fft_size: int, mel_bins: int, fmin: float, fmax: float
) -> np.ndarray:
    """Triangular mel filterbank, [mel_bins, fft_size // 2 + 1]."""
    fmax = min(fmax, sample_rate / 2.0)
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), mel_bins + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((mel_bins, fft_size // 2 + 1))
    for m in range(mel_bins):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (bin_freqs - left) / max(center - left, 1e-10)
        down = (right - bin_freqs) / max(right - center, 1e-10)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def compute_logmel(waveform: np.ndarray, config: FeatureConfig) -> MelSpectrogram:
    """Extract a log-amplitude mel spectrogram, [frames, mel_bins]."""
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.ndim != 1 or waveform.size == 0:
        raise ValueError("waveform must be a non-empty 1-D array")
    hop = config.hop_samples
    win = config.window_samples
    if config.fft_size < win:
        raise ValueError(f"fft_size {config.fft_size} smaller than window {win}")
    frames = frame_signal(waveform, hop, win) * np.hanning(win)[None, :]
    spectrum = np.abs(np.fft.rfft(frames, n=config.fft_size, axis=1))  # [T, fft//2+1]
    fb = mel_filterbank(
        config.sample_rate_hz, config.fft_size, config.mel_bins, config.fmin_hz, config.fmax_hz
    )
    mel = spectrum @ fb.T  # [T, mel_bins]
    logmel = np.log(np.maximum(mel, config.log_floor))
    return MelSpectrogram(
        values=logmel.astype(np.float32),
        hop_seconds=config.hop_seconds,
        window_seconds=config.window_ms / 1000.0,
    )
