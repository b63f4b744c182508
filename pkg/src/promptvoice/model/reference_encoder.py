"""Reference encoder: mel spectrogram to unit-norm style embedding.

A stack of strided 2-D convolutions summarizes the mel, a GRU collapses the
time axis, and multi-head attention over a learned token bank produces the
embedding as a weighted token combination.  The output is always normalized
to unit L2 norm.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from promptvoice.config import ReferenceEncoderConfig


class StyleTokenAttention(nn.Module):
    """Multi-head scaled dot-product attention over a learned token bank.

    Per head, weights come from softmax(q k / sqrt(d_head)); the embedding
    is the concatenation of per-head weighted token-value sums, passed
    through an output projection.
    """

    def __init__(self, query_dim: int, num_tokens: int, token_dim: int, num_heads: int,
                 embed_dim: int):
        super().__init__()
        if embed_dim % num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")
        self.num_heads = num_heads
        self.head_dim = embed_dim // num_heads
        self.tokens = nn.Parameter(torch.randn(num_tokens, token_dim) * 0.5)
        self.query_proj = nn.Linear(query_dim, embed_dim, bias=False)
        self.key_proj = nn.Linear(token_dim, embed_dim, bias=False)
        self.value_proj = nn.Linear(token_dim, embed_dim, bias=False)
        self.out_proj = nn.Linear(embed_dim, embed_dim, bias=False)

    def forward(
        self, query: Tensor, weights_override: Tensor | None = None
    ) -> tuple[Tensor, Tensor]:
        """query [B, query_dim] -> (embedding [B, embed_dim], weights [B, heads, tokens]).

        ``weights_override`` replaces the softmax weights (e.g. a uniform
        distribution) while keeping the value path intact.
        """
        squeeze = query.dim() == 1
        if squeeze:
            query = query.unsqueeze(0)
        b = query.shape[0]
        t = self.tokens.shape[0]
        q = self.query_proj(query).view(b, self.num_heads, self.head_dim)
        k = self.key_proj(self.tokens).view(t, self.num_heads, self.head_dim)
        v = self.value_proj(self.tokens).view(t, self.num_heads, self.head_dim)
        logits = torch.einsum("bhd,thd->bht", q, k) / (self.head_dim**0.5)
        weights = F.softmax(logits, dim=-1)  # [B, heads, tokens]
        if weights_override is not None:
            weights = weights_override.expand_as(weights)
        context = torch.einsum("bht,thd->bhd", weights, v).reshape(b, -1)
        embedding = self.out_proj(context)
        if squeeze:
            embedding = embedding.squeeze(0)
            weights = weights.squeeze(0)
        return embedding, weights


class ReferenceEncoder(nn.Module):
    """Speech summarizer producing the conditioning style embedding."""

    def __init__(self, mel_bins: int, config: ReferenceEncoderConfig):
        super().__init__()
        self.mel_bins = mel_bins
        channels = [1, *config.conv_channels]
        self.convs = nn.ModuleList(
            nn.Conv2d(channels[i], channels[i + 1], kernel_size=3, stride=2, padding=1)
            for i in range(len(config.conv_channels))
        )
        self.norms = nn.ModuleList(nn.BatchNorm2d(c) for c in config.conv_channels)
        freq = mel_bins
        for _ in config.conv_channels:
            freq = (freq - 1) // 2 + 1
        self.gru = nn.GRU(
            input_size=config.conv_channels[-1] * freq,
            hidden_size=config.gru_hidden,
            batch_first=True,
        )
        self.attention = StyleTokenAttention(
            query_dim=config.gru_hidden,
            num_tokens=config.num_tokens,
            token_dim=config.embed_dim,
            num_heads=config.attention_heads,
            embed_dim=config.embed_dim,
        )

    def forward(self, mel: Tensor, return_weights: bool = False):
        """mel [T, mel_bins] or [B, T, mel_bins] -> unit-norm embedding."""
        squeeze = mel.dim() == 2
        if squeeze:
            mel = mel.unsqueeze(0)
        if mel.shape[1] < 1:
            raise ValueError("reference encoder needs at least one mel frame")
        if mel.shape[2] != self.mel_bins:
            raise ValueError(f"expected {self.mel_bins} mel bins, got {mel.shape[2]}")
        x = mel.unsqueeze(1)  # [B, 1, T, F]
        for conv, norm in zip(self.convs, self.norms):
            x = F.relu(norm(conv(x)))
        b, c, t, f = x.shape
        x = x.permute(0, 2, 1, 3).reshape(b, t, c * f)
        _, hidden = self.gru(x)
        query = hidden.squeeze(0)  # [B, gru_hidden]
        embedding, weights = self.attention(query)
        embedding = embedding / embedding.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        if squeeze:
            embedding = embedding.squeeze(0)
            weights = weights.squeeze(0)
        if return_weights:
            return embedding, weights
        return embedding
