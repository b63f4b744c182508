from promptvoice.features.mel import MelSpectrogram, compute_logmel, frame_signal, mel_filterbank
from promptvoice.features.pitch import PitchTrack, extract_pitch
from promptvoice.features.stats import SILENCE_PHONES, StyleStats, utterance_stats
from promptvoice.features.cache import FeatureCache

__all__ = [
    "MelSpectrogram",
    "compute_logmel",
    "frame_signal",
    "mel_filterbank",
    "PitchTrack",
    "extract_pitch",
    "SILENCE_PHONES",
    "StyleStats",
    "utterance_stats",
    "FeatureCache",
]
