"""Signal-processing layer: mel extraction, pitch tracking, stats, caching.

The mel test validates against a from-scratch DFT oracle rather than the
implementation's own FFT path; the pitch tests use synthetic harmonic
signals whose true F0 is known exactly.
"""

import math

import numpy as np
import pytest

from promptvoice.config import resolve_config
from promptvoice.features.cache import FeatureCache
from promptvoice.features.invert import griffin_lim, mel_to_waveform
from promptvoice.features.mel import (
    compute_logmel,
    frame_signal,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
)
from promptvoice.features.pitch import extract_pitch
from promptvoice.features.stats import utterance_stats
from promptvoice.train.checkpoint import MelStats

from conftest import make_record

CONFIG = resolve_config({}).features
RATE = CONFIG.sample_rate_hz


def harmonic_wave(f0, seconds, rate=RATE, n_harmonics=8, amp=0.3):
    t = np.arange(int(seconds * rate)) / rate
    wave = sum(np.sin(2 * np.pi * f0 * k * t) / k for k in range(1, n_harmonics + 1))
    return (amp * wave / np.max(np.abs(wave))).astype(np.float64)


class TestFraming:
    def test_frame_count_is_ceil(self):
        frames = frame_signal(np.ones(1000), hop=240, window=960)
        assert frames.shape == (math.ceil(1000 / 240), 960)

    def test_frames_are_hop_shifted_views(self):
        wave = np.arange(3000, dtype=np.float64)
        frames = frame_signal(wave, hop=240, window=960)
        assert frames[1, 0] == wave[240]
        assert frames[2, 0] == wave[480]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            frame_signal(np.array([]), 240, 960)


class TestMel:
    def test_matches_naive_dft_oracle(self):
        """Re-derive one frame's log-mel with an explicit DFT sum."""
        rng = np.random.default_rng(0)
        wave = rng.standard_normal(RATE // 10) * 0.1
        mel = compute_logmel(wave, CONFIG)

        hop, win, nfft = CONFIG.hop_samples, CONFIG.window_samples, CONFIG.fft_size
        frame_index = 2
        segment = wave[frame_index * hop : frame_index * hop + win] * np.hanning(win)
        n = np.arange(nfft)
        bins = nfft // 2 + 1
        spectrum = np.zeros(bins)
        padded = np.zeros(nfft)
        padded[:win] = segment
        for k in range(bins):
            spectrum[k] = np.abs(np.sum(padded * np.exp(-2j * np.pi * k * n / nfft)))
        fb = mel_filterbank(RATE, nfft, CONFIG.mel_bins, CONFIG.fmin_hz, CONFIG.fmax_hz)
        expected = np.log(np.maximum(fb @ spectrum, CONFIG.log_floor))
        np.testing.assert_allclose(mel.values[frame_index], expected, atol=1e-4)

    def test_frame_count_matches_framing(self):
        wave = np.zeros(RATE)  # 1 s
        mel = compute_logmel(wave, CONFIG)
        assert mel.num_frames == math.ceil(RATE / CONFIG.hop_samples)
        assert mel.mel_bins == CONFIG.mel_bins

    def test_hop_shift_moves_content_one_frame(self):
        wave = harmonic_wave(220.0, 0.5)
        shifted = np.concatenate([np.zeros(CONFIG.hop_samples), wave])
        a = compute_logmel(wave, CONFIG).values
        b = compute_logmel(shifted, CONFIG).values
        # Energy at frame t of the original shows up at frame t+1 of the shifted
        np.testing.assert_allclose(b[1:a.shape[0]], a[: a.shape[0] - 1], atol=0.2)

    def test_silence_hits_log_floor(self):
        mel = compute_logmel(np.zeros(RATE // 10), CONFIG)
        np.testing.assert_allclose(mel.values, np.log(CONFIG.log_floor), rtol=1e-6)

    def test_tone_energy_lands_in_matching_band(self):
        f0 = 1000.0
        t = np.arange(RATE // 4) / RATE
        wave = 0.3 * np.sin(2 * np.pi * f0 * t)
        mel = compute_logmel(wave, CONFIG)
        fb = mel_filterbank(RATE, CONFIG.fft_size, CONFIG.mel_bins, CONFIG.fmin_hz, CONFIG.fmax_hz)
        centers = np.array(
            [np.sum(fb[m] * np.arange(fb.shape[1])) / max(fb[m].sum(), 1e-9) for m in range(fb.shape[0])]
        ) * RATE / CONFIG.fft_size
        hot = int(np.argmax(mel.values[5]))
        assert abs(centers[hot] - f0) < 150.0


class TestFilterbank:
    def test_shape_and_nonnegativity(self):
        fb = mel_filterbank(RATE, 1024, 80, 0.0, 12000.0)
        assert fb.shape == (80, 513)
        assert np.all(fb >= 0)

    def test_every_filter_has_support(self):
        fb = mel_filterbank(RATE, 1024, 80, 0.0, 12000.0)
        assert np.all(fb.sum(axis=1) > 0)

    def test_mel_scale_round_trip(self):
        f = np.array([100.0, 440.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, rtol=1e-10)


class TestPitch:
    @pytest.mark.parametrize("f0", [110.0, 220.0, 330.0])
    def test_harmonic_f0_recovered(self, f0):
        wave = harmonic_wave(f0, 0.5)
        track = extract_pitch(wave, CONFIG)
        voiced = track.vuv > 0.5
        assert voiced.mean() > 0.8
        measured = np.exp(track.log_f0[voiced]).mean()
        assert abs(measured - f0) / f0 < 0.02

    def test_steep_spectral_tilt_no_octave_error(self):
        # Near-sinusoidal signal: the autocorrelation plateau at 2x the period
        # must not win over the true lag.
        t = np.arange(RATE // 2) / RATE
        wave = 0.3 * np.sin(2 * np.pi * 220.0 * t) + 0.01 * np.sin(2 * np.pi * 440.0 * t)
        track = extract_pitch(wave, CONFIG)
        voiced = track.vuv > 0.5
        measured = np.exp(track.log_f0[voiced]).mean()
        assert abs(measured - 220.0) / 220.0 < 0.02

    def test_noise_is_unvoiced(self):
        rng = np.random.default_rng(1)
        track = extract_pitch(rng.standard_normal(RATE // 2) * 0.1, CONFIG)
        assert (track.vuv > 0.5).mean() < 0.1

    def test_silence_gate(self):
        wave = np.concatenate([harmonic_wave(220.0, 0.2), np.zeros(RATE // 5)])
        track = extract_pitch(wave, CONFIG)
        tail = track.vuv[-int(0.15 * RATE / CONFIG.hop_samples):]
        assert np.all(tail < 0.5)

    def test_unvoiced_regions_carry_interpolated_log_f0(self):
        wave = np.concatenate(
            [harmonic_wave(200.0, 0.2), np.zeros(RATE // 10), harmonic_wave(250.0, 0.2)]
        )
        track = extract_pitch(wave, CONFIG)
        assert np.all(np.isfinite(track.log_f0))
        mid = track.log_f0[(track.vuv < 0.5)]
        if mid.size:
            assert mid.min() >= math.log(150.0) and mid.max() <= math.log(300.0)


class TestStats:
    def test_rate_counts_non_silence_phones(self):
        wave = harmonic_wave(220.0, 1.0)
        track = extract_pitch(wave, CONFIG)
        record = make_record(
            phones=("a", "sp", "b", "c"), durations=(25, 25, 25, 25)
        )
        stats = utterance_stats(track, record, wave, CONFIG)
        assert stats.speaking_rate == pytest.approx(3.0, rel=0.01)

    def test_loudness_tracks_amplitude(self):
        wave = harmonic_wave(220.0, 0.5)
        track = extract_pitch(wave, CONFIG)
        record = make_record(phones=("a",), durations=(50,))
        loud = utterance_stats(track, record, wave, CONFIG).loudness_db
        quiet = utterance_stats(track, record, wave * 0.1, CONFIG).loudness_db
        assert loud - quiet == pytest.approx(20.0, abs=1.0)

    def test_fully_unvoiced_f0_is_nan(self):
        rng = np.random.default_rng(2)
        wave = rng.standard_normal(RATE // 4) * 0.05
        track = extract_pitch(wave, CONFIG)
        record = make_record(phones=("a",), durations=(25,))
        stats = utterance_stats(track, record, wave, CONFIG)
        assert math.isnan(stats.mean_f0_hz) or (track.vuv > 0.5).any()


class TestCache:
    def test_round_trip(self, tmp_path):
        config = resolve_config({})
        cache = FeatureCache(tmp_path, config)
        wave = harmonic_wave(220.0, 0.3)
        mel = compute_logmel(wave, config.features)
        pitch = extract_pitch(wave, config.features)
        record = make_record(phones=("a",), durations=(mel.num_frames,))
        stats = utterance_stats(pitch, record, wave, config.features)
        cache.put("u1", mel, pitch, stats)
        got = cache.get("u1")
        assert got is not None
        np.testing.assert_array_equal(got[0].values, mel.values)
        np.testing.assert_array_equal(got[1].log_f0, pitch.log_f0)
        assert got[2].to_dict() == stats.to_dict()

    def test_feature_config_change_invalidates(self, tmp_path):
        config = resolve_config({})
        cache = FeatureCache(tmp_path, config)
        wave = harmonic_wave(220.0, 0.3)
        mel = compute_logmel(wave, config.features)
        pitch = extract_pitch(wave, config.features)
        record = make_record(phones=("a",), durations=(mel.num_frames,))
        cache.put("u1", mel, pitch, utterance_stats(pitch, record, wave, config.features))

        other = resolve_config({"features": {"mel_bins": 40}})
        assert FeatureCache(tmp_path, other).get("u1") is None

    def test_training_config_change_does_not_invalidate(self, tmp_path):
        config = resolve_config({})
        cache = FeatureCache(tmp_path, config)
        wave = harmonic_wave(220.0, 0.3)
        mel = compute_logmel(wave, config.features)
        pitch = extract_pitch(wave, config.features)
        record = make_record(phones=("a",), durations=(mel.num_frames,))
        cache.put("u1", mel, pitch, utterance_stats(pitch, record, wave, config.features))

        other = resolve_config({"training": {"max_steps": 123}})
        assert FeatureCache(tmp_path, other).get("u1") is not None


class TestMelStats:
    def test_mean_std_match_numpy(self):
        rng = np.random.default_rng(3)
        chunks = [rng.standard_normal((n, 8)) * 2.0 + 1.0 for n in (5, 17, 30)]
        stats = MelStats.from_mels(chunks)
        stacked = np.concatenate(chunks)
        np.testing.assert_allclose(stats.mean, stacked.mean(axis=0), atol=1e-9)
        np.testing.assert_allclose(stats.std, stacked.std(axis=0), atol=1e-9)

    def test_normalize_round_trip(self):
        rng = np.random.default_rng(4)
        data = rng.standard_normal((40, 8)) * 3.0 - 2.0
        stats = MelStats.from_mels([data])
        np.testing.assert_allclose(stats.denormalize(stats.normalize(data)), data, atol=1e-6)

    def test_dict_round_trip(self):
        stats = MelStats.from_mels([np.arange(20, dtype=np.float64).reshape(5, 4)])
        again = MelStats.from_dict(stats.to_dict())
        np.testing.assert_allclose(again.mean, stats.mean)
        np.testing.assert_allclose(again.std, stats.std)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no frames"):
            MelStats.from_mels([])


class TestInversion:
    def test_griffin_lim_reconstructs_tone(self):
        small = resolve_config({"features": {"sample_rate_hz": 8000, "fft_size": 512, "fmax_hz": 4000.0}})
        t = np.arange(4000) / 8000.0
        wave = 0.4 * np.sin(2 * np.pi * 440.0 * t)
        from promptvoice.features.invert import _stft

        magnitude = np.abs(_stft(wave, small.features))
        recon = griffin_lim(magnitude, small.features, iterations=40, seed=0)
        spec = np.abs(np.fft.rfft(recon[:2048] * np.hanning(2048)))
        peak_hz = np.argmax(spec) * 8000.0 / 2048
        assert abs(peak_hz - 440.0) < 20.0

    def test_mel_to_waveform_shape_and_finiteness(self):
        small = resolve_config({"features": {"sample_rate_hz": 8000, "fft_size": 512, "fmax_hz": 4000.0, "mel_bins": 20}})
        t = np.arange(2400) / 8000.0
        wave = 0.3 * np.sin(2 * np.pi * 220.0 * t)
        mel = compute_logmel(wave, small.features)
        out = mel_to_waveform(mel.values, small.features, iterations=5, seed=0)
        assert out.ndim == 1 and out.size > 0
        assert np.all(np.isfinite(out))
