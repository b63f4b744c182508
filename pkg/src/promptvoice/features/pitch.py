"""Fundamental frequency tracking with voiced/unvoiced decisions.

The bundled estimator is a normalized-autocorrelation tracker: per frame,
the autocorrelation over the configured lag range is normalized by the
frame energies so the peak height is amplitude invariant; a frame is voiced
when the peak clears the voicing threshold and the frame carries energy
relative to the utterance peak.  Log-F0 is made continuous by linear
interpolation through unvoiced stretches (nearest-value extension at the
edges).  A different estimator can be swapped in via the ``PitchEstimator``
protocol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from promptvoice.config import FeatureConfig
from promptvoice.features.mel import frame_signal


@dataclass(frozen=True)
class PitchTrack:
    log_f0: np.ndarray  # [frames], continuous (interpolated through unvoiced spans)
    vuv: np.ndarray  # [frames], 1 where originally voiced

    @property
    def num_frames(self) -> int:
        return self.log_f0.shape[0]


class PitchEstimator(Protocol):
    def __call__(self, waveform: np.ndarray, config: FeatureConfig) -> PitchTrack: ...


def _interpolate_log_f0(f0: np.ndarray, voiced: np.ndarray, default_log_f0: float) -> np.ndarray:
    if not voiced.any():
        return np.full(f0.shape, default_log_f0)
    idx = np.arange(f0.size)
    log_voiced = np.log(f0[voiced])
    # np.interp extends with the nearest voiced value at both edges
    return np.interp(idx, idx[voiced], log_voiced)


def extract_pitch(waveform: np.ndarray, config: FeatureConfig) -> PitchTrack:
    """Per-frame continuous log-F0 and V/UV flags; frame grid matches the mel."""
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.ndim != 1 or waveform.size == 0:
        raise ValueError("waveform must be a non-empty 1-D array")

    sr = config.sample_rate_hz
    frames = frame_signal(waveform, config.hop_samples, config.window_samples)
    frames = frames - frames.mean(axis=1, keepdims=True)
    win = frames.shape[1]

    lag_min = max(2, int(np.floor(sr / config.f0_max_hz)))
    lag_max = int(np.ceil(sr / config.f0_min_hz))
    if lag_max >= win:
        raise ValueError(
            f"window of {win} samples too short for f0_min {config.f0_min_hz} Hz"
        )

    # full autocorrelation via FFT, all frames at once
    nfft = int(2 ** np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), axis=1)[:, : lag_max + 1]  # [T, lag]

    # normalization: r(l) = acf(l) / sqrt(e0(l) * e1(l)) with
    # e0(l) = sum_{n<win-l} x^2,  e1(l) = sum_{n>=l} x^2
    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    total = sq[:, -1:]
    lags = np.arange(lag_min, lag_max + 1)
    e0 = sq[:, win - lags]
    e1 = total - sq[:, lags]
    denom = np.sqrt(np.maximum(e0 * e1, 1e-20))
    r = acf[:, lags] / denom

    # Octave-error guard: r peaks near 1 at every multiple of the true
    # period, so take the SHORTEST lag whose correlation is close to the
    # frame maximum rather than the argmax, then re-center on the local peak.
    r_max = r.max(axis=1, keepdims=True)
    near_max = r >= np.maximum(r_max - 0.01, 0.9 * r_max)
    best = np.argmax(near_max, axis=1)  # first True = smallest lag
    window = np.clip(best[:, None] + np.arange(-8, 9)[None, :], 0, r.shape[1] - 1)
    rows = np.arange(r.shape[0])[:, None]
    best = window[rows[:, 0], np.argmax(r[rows, window], axis=1)]
    best_r = r[np.arange(r.shape[0]), best]

    # parabolic peak refinement on the normalized correlogram
    lag_hat = lags[best].astype(np.float64)
    interior = (best > 0) & (best < r.shape[1] - 1)
    if interior.any():
        i = np.where(interior)[0]
        y0 = r[i, best[i] - 1]
        y1 = r[i, best[i]]
        y2 = r[i, best[i] + 1]
        denom_p = y0 - 2 * y1 + y2
        shift = np.where(np.abs(denom_p) > 1e-12, 0.5 * (y0 - y2) / denom_p, 0.0)
        lag_hat[i] = lags[best[i]] + np.clip(shift, -0.5, 0.5)

    rms = np.sqrt(np.mean(frames**2, axis=1))
    peak_rms = rms.max()
    has_energy = rms > config.energy_floor * peak_rms if peak_rms > 0 else np.zeros_like(rms, bool)
    voiced = (best_r >= config.voicing_threshold) & has_energy

    f0 = np.where(voiced, sr / lag_hat, 0.0)
    log_f0 = _interpolate_log_f0(f0, voiced, config.default_log_f0)
    return PitchTrack(log_f0=log_f0.astype(np.float32), vuv=voiced.astype(np.int8))
