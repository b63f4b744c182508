"""Duration and pitch predictors plus the length regulator.

The duration predictor is a mixture density head over log-durations; at
inference time the mean of the highest-weight component is exponentiated,
clamped to at least one frame, and rounded.  The pitch predictor regresses
frame-level continuous log-F0 together with a voiced/unvoiced posterior.
"""

from __future__ import annotations

import torch
import torch.nn as nn
from torch import Tensor

from promptvoice.config import AcousticConfig
from promptvoice.model.mdn import GMMParams


class _ConvTrunk(nn.Module):
    """Conv1d/ReLU/LayerNorm/Dropout x2, the FastSpeech-style predictor body."""

    def __init__(self, in_dim: int, channels: int, kernel: int, dropout: float):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv1d(in_dim, channels, kernel, padding=pad)
        self.norm1 = nn.LayerNorm(channels)
        self.conv2 = nn.Conv1d(channels, channels, kernel, padding=pad)
        self.norm2 = nn.LayerNorm(channels)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        # x [B, L, in_dim] -> [B, L, channels]
        y = torch.relu(self.conv1(x.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm1(y))
        y = torch.relu(self.conv2(y.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm2(y))
        return y


class DurationPredictor(nn.Module):
    """Per-phone Gaussian mixture over log frame counts."""

    def __init__(self, in_dim: int, config: AcousticConfig):
        super().__init__()
        self.num_mixtures = config.duration_mixtures
        self.trunk = _ConvTrunk(
            in_dim, config.predictor_channels, config.predictor_kernel, config.predictor_dropout
        )
        self.proj = nn.Linear(config.predictor_channels, 3 * config.duration_mixtures)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, hidden: Tensor) -> GMMParams:
        """[B, L, in_dim] -> mixture with weights [B, L, K], means/scales [B, L, K, 1]."""
        raw = self.proj(self.trunk(hidden))
        k = self.num_mixtures
        weights = torch.softmax(raw[..., :k], dim=-1)
        means = raw[..., k : 2 * k].unsqueeze(-1)
        scales = torch.clamp(torch.exp(raw[..., 2 * k :]), min=1e-4).unsqueeze(-1)
        return GMMParams(weights=weights, means=means, scales=scales)

    @staticmethod
    def frames_from_mixture(gmm: GMMParams) -> Tensor:
        """Most likely component mean -> integer frame counts (>= 1).

        Rounding is half-up: floor(x + 0.5).
        """
        best = gmm.weights.argmax(dim=-1)  # [..., L]
        log_dur = torch.gather(gmm.means.squeeze(-1), -1, best.unsqueeze(-1)).squeeze(-1)
        frames = torch.floor(torch.clamp(torch.exp(log_dur), min=1.0) + 0.5)
        return frames.long()


class PitchPredictor(nn.Module):
    """Frame-level log-F0 regression plus voicing logit."""

    def __init__(self, in_dim: int, config: AcousticConfig):
        super().__init__()
        self.trunk = _ConvTrunk(
            in_dim, config.predictor_channels, config.predictor_kernel, config.predictor_dropout
        )
        self.proj = nn.Linear(config.predictor_channels, 2)

    def forward(self, hidden: Tensor) -> tuple[Tensor, Tensor]:
        """[B, T, in_dim] -> (log_f0 [B, T], vuv probability [B, T])."""
        raw = self.proj(self.trunk(hidden))
        return raw[..., 0], torch.sigmoid(raw[..., 1])


class PitchEmbedding(nn.Module):
    """Embed (log_f0, vuv) tracks into the decoder-conditioning space."""

    def __init__(self, out_dim: int, kernel: int = 9):
        super().__init__()
        self.conv = nn.Conv1d(2, out_dim, kernel, padding=kernel // 2)

    def forward(self, log_f0: Tensor, vuv: Tensor) -> Tensor:
        # [B, T] x2 -> [B, T, out_dim]
        track = torch.stack([log_f0, vuv.to(log_f0.dtype)], dim=1)
        return self.conv(track).transpose(1, 2)


def length_regulate(hidden: Tensor, durations: Tensor) -> Tensor:
    """Repeat each phone vector by its frame count.

    ``hidden`` [L, D] with ``durations`` [L] -> [sum(durations), D].  Zero
    durations drop the phone; negative durations are an error.  An all-zero
    duration vector yields an empty [0, D] tensor.
    """
    if hidden.dim() != 2 or durations.dim() != 1:
        raise ValueError("length_regulate expects [L, D] hidden and [L] durations")
    if hidden.shape[0] != durations.shape[0]:
        raise ValueError(
            f"length mismatch: {hidden.shape[0]} phones vs {durations.shape[0]} durations"
        )
    if bool((durations < 0).any()):
        raise ValueError("negative durations")
    return torch.repeat_interleave(hidden, durations.to(torch.long), dim=0)
