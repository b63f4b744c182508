"""Frame-budget batching and batch collation."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor

from promptvoice.model.vocab import PAD_ID


class BatchingError(ValueError):
    pass


def batch_by_frames(
    records: Sequence,
    max_frames: int = 30000,
    seed: int = 0,
    epoch: int = 0,
) -> list[list]:
    """Greedy packing of length-sorted records under a frame budget.

    Records (anything with ``total_frames`` and ``utterance_id``) are sorted
    ascending by frame count, packed greedily so no batch's frame sum
    exceeds ``max_frames``, then the batch order is shuffled with a seed
    derived from (seed, epoch).  Every record appears in exactly one batch.
    """
    if max_frames < 1:
        raise BatchingError(f"max_frames must be >= 1, got {max_frames}")
    ordered = sorted(records, key=lambda r: (r.total_frames, r.utterance_id))
    batches: list[list] = []
    current: list = []
    current_frames = 0
    for record in ordered:
        frames = record.total_frames
        if frames > max_frames:
            raise BatchingError(
                f"{record.utterance_id}: {frames} frames exceeds the "
                f"{max_frames}-frame batch budget"
            )
        if current and current_frames + frames > max_frames:
            batches.append(current)
            current = []
            current_frames = 0
        current.append(record)
        current_frames += frames
    if current:
        batches.append(current)
    random.Random(f"{seed}:{epoch}").shuffle(batches)
    return batches


@dataclass
class CollatedBatch:
    """Padded tensors for one training step."""

    utterance_ids: list[str]
    speaker_ids: list[str]
    prompts: list[str]
    phoneme_ids: Tensor  # [B, L] long, PAD_ID at padding
    phone_pad_mask: Tensor  # [B, L] bool, True at padding
    durations: Tensor  # [B, L] long, 0 at padding
    mel: Tensor  # [B, T, bins], normalized
    frame_mask: Tensor  # [B, T] bool, True at real frames
    log_f0: Tensor  # [B, T]
    vuv: Tensor  # [B, T]

    @property
    def size(self) -> int:
        return len(self.utterance_ids)


def collate(examples: Sequence, prompts: Sequence[str], mel_stats) -> CollatedBatch:
    """Pad a list of training examples into one batch.

    ``examples`` carry numpy features (see ``promptvoice.train.loop``);
    ``prompts`` is the composed prompt text per item, re-rendered by the
    caller each iteration.  Mels are normalized with ``mel_stats`` so the
    zero padding value coincides with the corpus mean.
    """
    if len(prompts) != len(examples):
        raise BatchingError(f"{len(prompts)} prompts for {len(examples)} examples")
    batch = len(examples)
    l_max = max(len(ex.phoneme_ids) for ex in examples)
    t_max = max(ex.total_frames for ex in examples)
    bins = examples[0].mel.shape[1]

    ids = torch.full((batch, l_max), PAD_ID, dtype=torch.long)
    pad_mask = torch.ones(batch, l_max, dtype=torch.bool)
    durations = torch.zeros(batch, l_max, dtype=torch.long)
    mel = torch.zeros(batch, t_max, bins, dtype=torch.float32)
    frame_mask = torch.zeros(batch, t_max, dtype=torch.bool)
    log_f0 = torch.zeros(batch, t_max, dtype=torch.float32)
    vuv = torch.zeros(batch, t_max, dtype=torch.float32)

    for i, ex in enumerate(examples):
        l, t = len(ex.phoneme_ids), ex.total_frames
        ids[i, :l] = torch.from_numpy(np.asarray(ex.phoneme_ids, dtype=np.int64))
        pad_mask[i, :l] = False
        durations[i, :l] = torch.from_numpy(np.asarray(ex.durations, dtype=np.int64))
        mel[i, :t] = torch.from_numpy(mel_stats.normalize(ex.mel).astype(np.float32))
        frame_mask[i, :t] = True
        log_f0[i, :t] = torch.from_numpy(np.asarray(ex.log_f0, dtype=np.float32))
        vuv[i, :t] = torch.from_numpy(np.asarray(ex.vuv, dtype=np.float32))

    return CollatedBatch(
        utterance_ids=[ex.utterance_id for ex in examples],
        speaker_ids=[ex.speaker_id for ex in examples],
        prompts=list(prompts),
        phoneme_ids=ids,
        phone_pad_mask=pad_mask,
        durations=durations,
        mel=mel,
        frame_mask=frame_mask,
        log_f0=log_f0,
        vuv=vuv,
    )
