"""Warmup learning-rate schedule."""

from __future__ import annotations

import math


def lr_schedule(step: int, base_lr: float, warmup_steps: int) -> float:
    """Noam-style rate: linear warmup to ``base_lr`` at ``warmup_steps``,
    then inverse-square-root decay.

    lr(step) = base_lr * warmup^0.5 * min(step^-0.5, step * warmup^-1.5)
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if warmup_steps < 1:
        raise ValueError(f"warmup_steps must be >= 1, got {warmup_steps}")
    scale = math.sqrt(warmup_steps)
    return base_lr * scale * min(step ** -0.5, step * warmup_steps ** -1.5)
