"""Conformer content encoder over phoneme sequences."""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from promptvoice.config import AcousticConfig, ReferenceEncoderConfig
from promptvoice.model.vocab import PAD_ID


def sinusoidal_positions(length: int, dim: int, dtype=torch.float32) -> Tensor:
    """Standard sin/cos position table [length, dim]."""
    position = torch.arange(length, dtype=dtype).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=dtype) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: dim // 2])
    return table


class FeedForwardModule(nn.Module):
    def __init__(self, dim: int, mult: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.LayerNorm(dim),
            nn.Linear(dim, dim * mult),
            nn.SiLU(),
            nn.Dropout(dropout),
            nn.Linear(dim * mult, dim),
            nn.Dropout(dropout),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.net(x)


class ConvolutionModule(nn.Module):
    def __init__(self, dim: int, kernel: int, dropout: float):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.pointwise_in = nn.Conv1d(dim, 2 * dim, 1)
        self.depthwise = nn.Conv1d(dim, dim, kernel, padding=kernel // 2, groups=dim)
        # Per-position norm: batch statistics or time pooling here would let
        # padding length bleed into real positions.
        self.channel_norm = nn.LayerNorm(dim)
        self.pointwise_out = nn.Conv1d(dim, dim, 1)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor, pad_mask: Tensor | None) -> Tensor:
        # x [B, L, dim]; pad_mask True at padded positions
        y = self.norm(x).transpose(1, 2)
        if pad_mask is not None:
            y = y.masked_fill(pad_mask.unsqueeze(1), 0.0)
        y = F.glu(self.pointwise_in(y), dim=1)
        # The pointwise bias re-populates padded columns; zero them again so
        # the depthwise taps see true zeros, matching the implicit edge
        # padding of an unpadded sequence.
        if pad_mask is not None:
            y = y.masked_fill(pad_mask.unsqueeze(1), 0.0)
        y = self.depthwise(y).transpose(1, 2)
        y = F.silu(self.channel_norm(y))
        y = self.pointwise_out(y.transpose(1, 2)).transpose(1, 2)
        return self.dropout(y)


class ConformerBlock(nn.Module):
    """Macaron feed-forward pair around self-attention and a conv module."""

    def __init__(self, dim: int, heads: int, kernel: int, ff_mult: int, dropout: float):
        super().__init__()
        self.ff1 = FeedForwardModule(dim, ff_mult, dropout)
        self.attn_norm = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, dropout=dropout, batch_first=True)
        self.attn_dropout = nn.Dropout(dropout)
        self.conv = ConvolutionModule(dim, kernel, dropout)
        self.ff2 = FeedForwardModule(dim, ff_mult, dropout)
        self.final_norm = nn.LayerNorm(dim)

    def forward(self, x: Tensor, pad_mask: Tensor | None) -> Tensor:
        x = x + 0.5 * self.ff1(x)
        y = self.attn_norm(x)
        attn_out, _ = self.attn(y, y, y, key_padding_mask=pad_mask, need_weights=False)
        x = x + self.attn_dropout(attn_out)
        x = x + self.conv(x, pad_mask)
        x = x + 0.5 * self.ff2(x)
        return self.final_norm(x)


class ContentEncoder(nn.Module):
    """Phoneme ids -> per-phone hidden states, biased by the style embedding."""

    def __init__(self, vocab_size: int, config: AcousticConfig,
                 ref_config: ReferenceEncoderConfig):
        super().__init__()
        self.hidden_dim = config.hidden_dim
        self.embedding = nn.Embedding(vocab_size, config.hidden_dim, padding_idx=PAD_ID)
        self.blocks = nn.ModuleList(
            ConformerBlock(
                config.hidden_dim,
                config.conformer_heads,
                config.conformer_kernel,
                config.conformer_ff_mult,
                config.dropout,
            )
            for _ in range(config.conformer_blocks)
        )
        self.style_proj = nn.Linear(ref_config.embed_dim, config.hidden_dim)

    def forward(self, phoneme_ids: Tensor, style: Tensor, pad_mask: Tensor | None = None) -> Tensor:
        """[B, L] ids + [B, embed_dim] style -> [B, L, hidden].

        ``pad_mask`` is True at padded positions; padded rows are zeroed in
        the output.
        """
        if phoneme_ids.numel() == 0 or phoneme_ids.shape[-1] == 0:
            raise ValueError("empty phoneme sequence")
        x = self.embedding(phoneme_ids)
        x = x + sinusoidal_positions(x.shape[1], x.shape[2], dtype=x.dtype).to(x.device)
        for block in self.blocks:
            x = block(x, pad_mask)
        x = x + self.style_proj(style).unsqueeze(1)
        if pad_mask is not None:
            x = x.masked_fill(pad_mask.unsqueeze(-1), 0.0)
        return x
