"""Shared fixtures: a small synthetic corpus and a briefly trained checkpoint.

The corpus and checkpoint are session-scoped because several test modules
(pipeline, service, CLI) only need *a* working model, not a converged one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from promptvoice.config import Config, resolve_config
from promptvoice.data.manifest import (
    SpeakerPromptAnnotation,
    UtteranceRecord,
    load_manifest,
    load_speaker_prompts,
)
from promptvoice.dataset import (
    assign_corpus_levels,
    build_training_examples,
    build_vocabulary,
    extract_features,
    save_levels,
)
from promptvoice.features.cache import FeatureCache
from promptvoice.prompts.thresholds import compute_thresholds
from promptvoice.toydata import make_toy_corpus, toy_config


@dataclass
class CorpusAssets:
    root: Path
    config: Config
    manifest_path: Path
    cache_dir: Path
    levels_path: Path
    speaker_prompts_path: Path
    records: list
    levels: dict
    speaker_prompts: dict
    vocab: object
    examples: list


def prepare_corpus(root: Path, config: Config, utterances_per_speaker: int, seed: int) -> CorpusAssets:
    corpus = make_toy_corpus(
        root / "corpus", config=config, utterances_per_speaker=utterances_per_speaker, seed=seed
    )
    records = load_manifest(corpus.manifest_path)
    cache = FeatureCache(root / "cache", config)
    rows = extract_features(records, config, cache, audio_root=corpus.root)
    table = compute_thresholds([(r.stats, r.gender) for r in rows])
    levels = assign_corpus_levels(rows, table)
    levels_path = root / "levels.jsonl"
    save_levels(levels, levels_path)
    speaker_prompts = load_speaker_prompts(corpus.speaker_prompts_path)
    vocab = build_vocabulary(records)
    examples = build_training_examples(records, cache, levels, speaker_prompts, vocab)
    return CorpusAssets(
        root=root,
        config=config,
        manifest_path=corpus.manifest_path,
        cache_dir=cache.cache_dir,
        levels_path=levels_path,
        speaker_prompts_path=corpus.speaker_prompts_path,
        records=records,
        levels=levels,
        speaker_prompts=speaker_prompts,
        vocab=vocab,
        examples=examples,
    )


def quick_train_config(base: Config, max_steps: int, seed: int = 2024) -> Config:
    doc = base.to_dict()
    doc["training"]["max_steps"] = max_steps
    doc["training"]["seed"] = seed
    return resolve_config(doc)


@pytest.fixture(scope="session")
def mini_assets(tmp_path_factory) -> CorpusAssets:
    """4 speakers x 3 utterances: enough for shape and plumbing tests."""
    root = tmp_path_factory.mktemp("mini_corpus")
    return prepare_corpus(root, toy_config(), utterances_per_speaker=3, seed=7)


@pytest.fixture(scope="session")
def mini_checkpoint(mini_assets, tmp_path_factory) -> Path:
    """A 10-step checkpoint: untrained quality, fully functional plumbing."""
    from promptvoice.train.loop import train

    out = tmp_path_factory.mktemp("mini_run")
    config = quick_train_config(mini_assets.config, max_steps=10)
    result = train(config, mini_assets.examples, mini_assets.vocab, out)
    return result.final_checkpoint


def make_record(uid="u1", spk="s1", phones=("a", "b"), durations=(2, 3), gender="female"):
    return UtteranceRecord(
        utterance_id=uid,
        speaker_id=spk,
        audio_path=f"{uid}.wav",
        text="ab",
        phonemes=tuple(phones),
        durations=tuple(durations),
        gender=gender,
    )
