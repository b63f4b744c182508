"""Seeded train/validation speaker split."""

from __future__ import annotations

import random
from typing import Iterable

from promptvoice.data.manifest import UtteranceRecord


def split_speakers(
    records: Iterable[UtteranceRecord],
    validation_fraction: float,
    seed: int,
) -> tuple[set[str], set[str]]:
    """Hold out a seeded fraction of speakers for validation.

    At least one speaker is held out whenever there are two or more speakers
    and the fraction is non-zero.
    """
    speakers = sorted({r.speaker_id for r in records})
    if not speakers:
        return set(), set()
    if validation_fraction <= 0 or len(speakers) < 2:
        return set(speakers), set()
    rng = random.Random(seed)
    shuffled = speakers[:]
    rng.shuffle(shuffled)
    n_val = max(1, round(len(speakers) * validation_fraction))
    n_val = min(n_val, len(speakers) - 1)
    val = set(shuffled[:n_val])
    train = set(shuffled[n_val:])
    return train, val
