"""Training loop: frame-budget batches, per-iteration prompt resampling,
warmup schedule, structured loss logs, periodic checkpoints, seeded resume.

One trainer owns the parameters.  Style prompts are re-rendered from each
utterance's level assignment every iteration; the composed prompt also
carries the per-speaker prompt unless disabled (prompt-only ablation).
The reference encoder runs per item on unpadded mels so batch packing never
changes an utterance's style embedding.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from promptvoice.config import Config
from promptvoice.model.full import PromptVoiceModel
from promptvoice.model.vocab import PhonemeVocabulary
from promptvoice.prompts.templates import (
    Lexicon,
    PromptTemplate,
    compose_prompt,
    default_lexicon,
    default_templates,
    render_style_prompt,
)
from promptvoice.prompts.thresholds import StyleLevels
from promptvoice.train.batching import CollatedBatch, batch_by_frames, collate
from promptvoice.train.checkpoint import (
    MelStats,
    capture_rng_state,
    load_checkpoint,
    restore_rng_state,
    save_checkpoint,
)
from promptvoice.train.loss import LossBreakdown, total_loss
from promptvoice.train.schedule import lr_schedule

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingExample:
    """Fully materialized features and labels for one utterance."""

    utterance_id: str
    speaker_id: str
    gender: str
    phoneme_ids: np.ndarray  # [L] int64
    durations: np.ndarray  # [L] int64 frame counts
    mel: np.ndarray  # [T, bins] raw log-mel
    log_f0: np.ndarray  # [T]
    vuv: np.ndarray  # [T]
    levels: StyleLevels
    speaker_prompt: str | None = None

    def __post_init__(self):
        if int(np.sum(self.durations)) != self.mel.shape[0]:
            raise TrainingError(
                f"{self.utterance_id}: durations sum to {int(np.sum(self.durations))} "
                f"but the mel has {self.mel.shape[0]} frames"
            )
        if self.mel.shape[0] != len(self.log_f0) or len(self.log_f0) != len(self.vuv):
            raise TrainingError(f"{self.utterance_id}: feature length mismatch")

    @property
    def total_frames(self) -> int:
        return int(self.mel.shape[0])


@dataclass
class TrainResult:
    steps: int
    epochs_completed: int
    final_checkpoint: Path
    loss_log: Path
    first_losses: dict[str, float] = field(default_factory=dict)
    last_losses: dict[str, float] = field(default_factory=dict)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def build_vocabulary(examples_phonemes: Sequence[Sequence[str]]) -> PhonemeVocabulary:
    symbols = set()
    for phones in examples_phonemes:
        symbols.update(phones)
    return PhonemeVocabulary(symbols)


def render_batch_prompts(
    examples: Sequence[TrainingExample],
    templates: Sequence[PromptTemplate],
    lexicon: Lexicon,
    rng: random.Random,
    use_speaker_prompt: bool,
) -> list[str]:
    prompts = []
    for ex in examples:
        style = render_style_prompt(ex.levels, ex.gender, templates, rng, lexicon)
        speaker = ex.speaker_prompt if use_speaker_prompt else None
        prompts.append(compose_prompt(speaker, style))
    return prompts


def encode_references(model: PromptVoiceModel, batch: CollatedBatch) -> torch.Tensor:
    """Per-item reference embeddings from unpadded mel segments, [B, E]."""
    embeddings = []
    for i in range(batch.size):
        frames = int(batch.frame_mask[i].sum())
        embeddings.append(model.encode_reference(batch.mel[i : i + 1, :frames]))
    return torch.cat(embeddings, dim=0)


def _dump_bad_batch(out_dir: Path, step: int, batch: CollatedBatch, losses: dict) -> Path:
    dump_path = out_dir / f"nan_batch_step{step}.pt"
    torch.save(
        {
            "step": step,
            "losses": losses,
            "utterance_ids": batch.utterance_ids,
            "prompts": batch.prompts,
            "phoneme_ids": batch.phoneme_ids,
            "durations": batch.durations,
            "mel": batch.mel,
            "log_f0": batch.log_f0,
            "vuv": batch.vuv,
        },
        dump_path,
    )
    return dump_path


def train(
    config: Config,
    examples: Sequence[TrainingExample],
    vocab: PhonemeVocabulary,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
    templates: Sequence[PromptTemplate] | None = None,
    lexicon: Lexicon | None = None,
) -> TrainResult:
    """Run the full training recipe and leave checkpoints in ``out_dir``."""
    if not examples:
        raise TrainingError("no training examples")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = list(templates) if templates is not None else default_templates()
    lexicon = lexicon if lexicon is not None else default_lexicon()
    tc = config.training

    seed_everything(tc.seed)
    prompt_rng = random.Random(tc.seed + 1)

    from promptvoice.data.splits import split_speakers

    train_speakers, val_speakers = split_speakers(
        examples, tc.validation_speaker_fraction, tc.seed
    )
    train_examples = [ex for ex in examples if ex.speaker_id in train_speakers]
    if not train_examples:
        raise TrainingError("validation split removed every speaker")
    if val_speakers:
        logger.info("holding out %d speaker(s) for validation", len(val_speakers))

    mel_stats = MelStats.from_mels(ex.mel for ex in train_examples)
    model = PromptVoiceModel(len(vocab), config)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=tc.base_lr, weight_decay=tc.weight_decay
    )
    weights = (
        tc.loss_weight_decoder,
        tc.loss_weight_duration,
        tc.loss_weight_pitch,
        tc.loss_weight_style,
    )

    step = 0
    start_epoch = 0
    start_batch = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        if payload["config_hash"] != config.hash():
            raise TrainingError(
                "checkpoint was written under a different config "
                f"({payload['config_hash']} != {config.hash()})"
            )
        model.load_state_dict(payload["model"])
        optimizer.load_state_dict(payload["optimizer"])
        mel_stats = MelStats.from_dict(payload["mel_stats"])
        step = payload["step"]
        start_epoch = payload["epoch"]
        start_batch = payload["batch_index"]
        rng_state = payload["rng"]
        restore_rng_state(rng_state)
        prompt_rng.setstate(rng_state["prompt"])
        logger.info("resumed from %s at step %d", resume_from, step)

    loss_log = out_dir / "losses.jsonl"
    log_handle = loss_log.open("a", encoding="utf-8")
    first_losses: dict[str, float] = {}
    last_losses: dict[str, float] = {}
    epochs_completed = start_epoch
    final_position = (start_epoch, start_batch)
    stop = False

    def save(step_: int, epoch_: int, batch_index_: int, name: str) -> Path:
        rng = capture_rng_state()
        rng["prompt"] = prompt_rng.getstate()
        return save_checkpoint(
            out_dir / name,
            model=model,
            optimizer=optimizer,
            step=step_,
            epoch=epoch_,
            batch_index=batch_index_,
            config=config,
            vocab=vocab,
            mel_stats=mel_stats,
            rng=rng,
        )

    model.train()
    try:
        for epoch in range(start_epoch, tc.epochs):
            batches = batch_by_frames(
                train_examples, tc.max_frames_per_batch, seed=tc.seed, epoch=epoch
            )
            for batch_index, batch_examples in enumerate(batches):
                if epoch == start_epoch and batch_index < start_batch:
                    continue
                step += 1
                lr = lr_schedule(step, tc.base_lr, tc.warmup_steps)
                for group in optimizer.param_groups:
                    group["lr"] = lr

                prompts = render_batch_prompts(
                    batch_examples, templates, lexicon, prompt_rng, tc.use_speaker_prompt
                )
                batch = collate(batch_examples, prompts, mel_stats)
                reference = encode_references(model, batch)
                prompt_out = model.prompt_encoder(batch.prompts)
                outputs = model(
                    batch.phoneme_ids,
                    batch.phone_pad_mask,
                    batch.durations,
                    reference,
                    batch.log_f0,
                    batch.vuv,
                )
                losses = total_loss(
                    model.decoder,
                    outputs,
                    batch,
                    prompt_out,
                    reference,
                    model.schedule,
                    weights=weights,
                )

                floats = losses.to_floats()
                if not all(math.isfinite(v) for v in floats.values()):
                    dump = _dump_bad_batch(out_dir, step, batch, floats)
                    raise TrainingError(
                        f"non-finite loss at step {step} "
                        f"({floats}); offending batch dumped to {dump}"
                    )

                optimizer.zero_grad()
                losses.total.backward()
                optimizer.step()

                record = {"step": step, "epoch": epoch, "lr": lr, **floats}
                log_handle.write(json.dumps(record) + "\n")
                log_handle.flush()
                if not first_losses:
                    first_losses = floats
                last_losses = floats

                if tc.checkpoint_every and step % tc.checkpoint_every == 0:
                    save(step, epoch, batch_index + 1, f"step_{step:06d}.pt")
                if tc.max_steps and step >= tc.max_steps:
                    final_position = (epoch, batch_index + 1)
                    stop = True
                    break
            if stop:
                break
            epochs_completed = epoch + 1
            final_position = (epoch + 1, 0)
            start_batch = 0
    finally:
        log_handle.close()

    final = save(step, final_position[0], final_position[1], "final.pt")
    return TrainResult(
        steps=step,
        epochs_completed=epochs_completed,
        final_checkpoint=final,
        loss_log=loss_log,
        first_losses=first_losses,
        last_losses=last_losses,
    )
