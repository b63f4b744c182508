"""Manifest, alignment, split, and text-frontend behavior."""

import math

import pytest

from promptvoice.data.alignment import AlignmentError, distribute_frames, load_alignment
from promptvoice.data.manifest import (
    DEFAULT_DESCRIPTOR_VOCABULARY,
    ManifestError,
    SpeakerPromptAnnotation,
    UtteranceRecord,
    load_manifest,
    load_speaker_prompts,
    save_manifest,
    save_speaker_prompts,
)
from promptvoice.data.splits import split_speakers
from promptvoice.frontend import FrontendError, text_to_phonemes

from conftest import make_record


class TestManifest:
    def test_round_trip(self, tmp_path):
        records = [make_record("u1"), make_record("u2", spk="s2", gender="male")]
        path = tmp_path / "manifest.jsonl"
        save_manifest(records, path)
        assert load_manifest(path) == records

    def test_length_mismatch_rejected(self):
        with pytest.raises(ManifestError, match="mismatch"):
            make_record(phones=("a",), durations=(1, 2))

    def test_negative_duration_rejected(self):
        with pytest.raises(ManifestError, match="negative"):
            make_record(durations=(1, -2))

    def test_bad_gender_rejected(self):
        with pytest.raises(ManifestError, match="gender"):
            make_record(gender="robot")

    def test_total_frames_and_trainability(self):
        assert make_record(durations=(2, 3)).total_frames == 5
        assert make_record(durations=(0, 0)).is_trainable is False

    def test_malformed_line_reports_location(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text('{"utterance_id": "u1"}\n', encoding="utf-8")
        with pytest.raises(ManifestError, match=r"manifest\.jsonl:1"):
            load_manifest(path)


class TestSpeakerPrompts:
    def test_round_trip(self, tmp_path):
        ann = SpeakerPromptAnnotation(
            speaker_id="s1",
            descriptor_words=frozenset({"deep", "husky"}),
            prompt_text="His voice is deep and husky.",
        )
        path = tmp_path / "speaker_prompts.jsonl"
        save_speaker_prompts([ann], path)
        loaded = load_speaker_prompts(path)
        assert loaded["s1"].descriptor_words == ann.descriptor_words
        assert loaded["s1"].prompt_text == ann.prompt_text

    def test_descriptors_must_be_in_vocabulary(self):
        assert "deep" in DEFAULT_DESCRIPTOR_VOCABULARY
        with pytest.raises(ManifestError, match="outside vocabulary"):
            SpeakerPromptAnnotation(
                speaker_id="s1",
                descriptor_words=frozenset({"sonorous_nonsense"}),
                prompt_text="x",
            )


class TestAlignment:
    def test_distribute_frames_preserves_total(self):
        frames = distribute_frames([0.033, 0.033, 0.034], 10, 0.01)
        assert sum(frames) == 10
        assert frames == [3, 3, 4]

    def test_distribute_frames_rejects_overflow(self):
        with pytest.raises(AlignmentError, match="exceed"):
            distribute_frames([1.0, 1.0], 100, 0.01)

    def test_load_alignment_basic(self, tmp_path):
        path = tmp_path / "u.lab"
        path.write_text("a 0.00 0.10\nb 0.10 0.25\n", encoding="utf-8")
        phones, durations = load_alignment(path, 0.01)
        assert phones == ["a", "b"]
        assert sum(durations) == 25

    def test_total_seconds_extends_last_phone(self, tmp_path):
        path = tmp_path / "u.lab"
        path.write_text("a 0.00 0.10\n", encoding="utf-8")
        _, durations = load_alignment(path, 0.01, total_seconds=0.30)
        # ceil(0.30 / 0.01) frames, matching the mel framing of the waveform
        assert sum(durations) == 30

    def test_out_of_order_segments_rejected(self, tmp_path):
        path = tmp_path / "u.lab"
        path.write_text("a 0.10 0.20\nb 0.00 0.10\n", encoding="utf-8")
        with pytest.raises(AlignmentError, match="overlaps or is out of order"):
            load_alignment(path, 0.01)

    def test_non_numeric_time_rejected(self, tmp_path):
        path = tmp_path / "u.lab"
        path.write_text("a zero 0.10\n", encoding="utf-8")
        with pytest.raises(AlignmentError, match="non-numeric"):
            load_alignment(path, 0.01)


class TestSplits:
    def _records(self, n_speakers, per_speaker=2):
        return [
            make_record(f"u{s}_{i}", spk=f"s{s}")
            for s in range(n_speakers)
            for i in range(per_speaker)
        ]

    def test_zero_fraction_keeps_all(self):
        train, val = split_speakers(self._records(10), 0.0, seed=1)
        assert len(train) == 10 and not val

    def test_fraction_holds_out_at_least_one(self):
        train, val = split_speakers(self._records(10), 0.02, seed=1)
        assert len(val) == 1
        assert train | val == {f"s{i}" for i in range(10)}
        assert not train & val

    def test_single_speaker_never_held_out(self):
        train, val = split_speakers(self._records(1), 0.5, seed=1)
        assert len(train) == 1 and not val

    def test_seeded_determinism(self):
        records = self._records(20)
        assert split_speakers(records, 0.1, seed=3) == split_speakers(records, 0.1, seed=3)
        assert split_speakers(records, 0.1, seed=3) != split_speakers(records, 0.1, seed=4)


class TestFrontend:
    def test_words_become_letters_with_silence(self):
        assert text_to_phonemes("ba ki") == ["b", "a", "sp", "k", "i"]

    def test_case_and_punctuation_normalized(self):
        assert text_to_phonemes("Ba, ki!") == ["b", "a", "sp", "k", "i"]

    def test_whitespace_runs_collapse(self):
        assert text_to_phonemes("ba \t  ki") == ["b", "a", "sp", "k", "i"]

    def test_empty_text_rejected(self):
        with pytest.raises(FrontendError):
            text_to_phonemes("12 34 !!")

    def test_no_trailing_silence(self):
        assert text_to_phonemes("ba ")[-1] != "sp"
