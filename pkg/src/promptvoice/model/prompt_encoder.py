"""Prompt encoder: natural-language prompt to a density over style embeddings.

A text backbone produces a fixed-size prompt embedding from the hidden
state at the classification position; three linear layers interleaved by
ReLU feed either a mixture head (weights/means/scales of a diagonal GMM
over the embedding space) or, in the no-mixture ablation, a direct vector
head trained with cosine loss.

Two backbones are provided.  ``MockTextBackbone`` is fully deterministic
and fully frozen (hash-seeded token vectors, fixed mixing and pooling) and
needs no downloaded weights, so every downstream path is testable offline.
``PretrainedTextBackbone`` adapts a masked-language-model from
``transformers`` with everything frozen except the last attention layer.
"""

from __future__ import annotations

import hashlib
import logging
import re
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from promptvoice.config import PromptEncoderConfig
from promptvoice.model.mdn import GMMParams

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")


@runtime_checkable
class TextBackbone(Protocol):
    dim: int
    identifier: str
    max_tokens: int

    def __call__(self, texts: Sequence[str]) -> Tensor: ...


def _seeded_normal(tag: str, shape: tuple[int, ...]) -> np.ndarray:
    seed = int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(shape)


class MockTextBackbone(nn.Module):
    """Deterministic stand-in for a pretrained language model.

    Token vectors are derived from a hash of the token string, so the same
    text maps to the same embedding on any platform.  Every parameter is
    frozen: on desk-scale corpora a trainable pooling layer learns to
    suppress prompt-to-prompt variation (collapsing the text signal the
    mixture head needs), so the mock exposes a fixed representation and all
    adaptation happens in the encoder stack above it.
    """

    identifier = "mock"

    def __init__(self, dim: int = 256, max_tokens: int = 512, num_heads: int = 4):
        super().__init__()
        self.dim = dim
        self.max_tokens = max_tokens
        self._token_cache: dict[str, Tensor] = {}

        self.early = nn.Linear(dim, dim)
        with torch.no_grad():
            self.early.weight.copy_(
                torch.from_numpy(_seeded_normal("early.weight", (dim, dim)) / dim**0.5)
            )
            self.early.bias.zero_()

        self.attention = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm = nn.LayerNorm(dim)
        with torch.no_grad():
            self.attention.in_proj_weight.copy_(
                torch.from_numpy(_seeded_normal("attn.in_proj", (3 * dim, dim)) / dim**0.5)
            )
            self.attention.in_proj_bias.zero_()
            self.attention.out_proj.weight.copy_(
                torch.from_numpy(_seeded_normal("attn.out_proj", (dim, dim)) / dim**0.5)
            )
            self.attention.out_proj.bias.zero_()
        for param in self.parameters():
            param.requires_grad_(False)

    def _token_vector(self, token: str) -> Tensor:
        cached = self._token_cache.get(token)
        if cached is None:
            cached = torch.from_numpy(_seeded_normal("tok:" + token, (self.dim,))).float()
            self._token_cache[token] = cached
        return cached

    def _embed_one(self, text: str) -> Tensor:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise ValueError(f"no tokens in prompt {text!r}")
        if len(tokens) > self.max_tokens:
            logger.warning("prompt truncated to %d tokens", self.max_tokens)
            tokens = tokens[: self.max_tokens]
        vectors = [self._token_vector(t) for t in tokens]
        x = torch.stack(vectors).to(self.early.weight.dtype)
        pos = torch.from_numpy(
            _seeded_normal("pos", (self.max_tokens, self.dim))
        ).to(x.dtype)[: x.shape[0]]
        x = torch.tanh(self.early(x + 0.1 * pos)).unsqueeze(0)  # [1, L, dim]
        # Pool the token content and refine it with a classification-vector
        # query; a constant query alone would leave the output nearly
        # text-independent, which defeats prompt conditioning downstream.
        query = torch.tanh(self.early(self._token_vector("[CLS]").to(x.dtype)))
        query = query.reshape(1, 1, self.dim)
        attn_out, _ = self.attention(query, x, x, need_weights=False)  # [1, 1, dim]
        hidden = self.norm(x.mean(dim=1) + attn_out[:, 0])
        return hidden[0]

    def forward(self, texts: Sequence[str]) -> Tensor:
        if isinstance(texts, str):
            raise TypeError("pass a sequence of texts")
        if any(not t.strip() for t in texts):
            raise ValueError("empty prompt text")
        return torch.stack([self._embed_one(t) for t in texts])


class PretrainedTextBackbone(nn.Module):
    """Adapter over a ``transformers`` masked language model.

    All backbone parameters are frozen except those of the final attention
    layer.  Requires the optional ``pretrained`` dependency set and local or
    downloadable weights.
    """

    def __init__(self, model_name: str, max_tokens: int = 512):
        super().__init__()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ImportError(
                "the pretrained backbone needs the 'transformers' package "
                "(pip install promptvoice[pretrained])"
            ) from exc
        self.identifier = f"pretrained:{model_name}"
        self.max_tokens = max_tokens
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.dim = self.model.config.hidden_size
        for p in self.model.parameters():
            p.requires_grad_(False)
        last_layer = self.model.encoder.layer[-1].attention
        for p in last_layer.parameters():
            p.requires_grad_(True)

    def forward(self, texts: Sequence[str]) -> Tensor:
        if any(not t.strip() for t in texts):
            raise ValueError("empty prompt text")
        enc = self.tokenizer(
            list(texts),
            return_tensors="pt",
            padding=True,
            truncation=True,
            max_length=self.max_tokens,
        )
        out = self.model(**enc)
        return out.last_hidden_state[:, 0]  # classification token position


def build_backbone(config: PromptEncoderConfig) -> nn.Module:
    if config.backbone == "mock":
        return MockTextBackbone(dim=config.backbone_dim, max_tokens=config.max_tokens)
    if config.backbone.startswith("pretrained:"):
        return PretrainedTextBackbone(
            config.backbone.split(":", 1)[1], max_tokens=config.max_tokens
        )
    raise ValueError(f"unknown backbone {config.backbone!r}")


class PromptEncoder(nn.Module):
    """Prompt text -> GMM over style embeddings (or a direct vector head)."""

    def __init__(self, config: PromptEncoderConfig, embed_dim: int,
                 backbone: nn.Module | None = None):
        super().__init__()
        self.config = config
        self.embed_dim = embed_dim
        self.backbone = backbone if backbone is not None else build_backbone(config)
        h = config.hidden_dim
        self.stack = nn.Sequential(
            nn.Linear(self.backbone.dim, h),
            nn.ReLU(),
            nn.Linear(h, h),
            nn.ReLU(),
            nn.Linear(h, h),
        )
        self.use_mdn = config.use_mdn
        k = config.num_mixtures
        if self.use_mdn:
            self.mdn_proj = nn.Linear(h, k + 2 * k * embed_dim)
            # Components with identical parameters receive identical
            # gradients and never specialise, so the means start spread
            # while weights stay near uniform and scales near one.
            nn.init.normal_(self.mdn_proj.weight, std=0.01)
            nn.init.zeros_(self.mdn_proj.bias)
            with torch.no_grad():
                self.mdn_proj.bias[k : k + k * embed_dim].normal_(
                    std=embed_dim**-0.5
                )
        else:
            self.vector_proj = nn.Linear(h, embed_dim)

    def embed(self, texts: Sequence[str]) -> Tensor:
        """Backbone embedding at the classification position, [B, text_dim]."""
        return self.backbone(texts)

    def density(self, prompt_embedding: Tensor) -> GMMParams:
        """Mixture parameters from a prompt embedding [B, text_dim] or [text_dim]."""
        if not self.use_mdn:
            raise RuntimeError("density head disabled (no-mixture ablation)")
        squeeze = prompt_embedding.dim() == 1
        if squeeze:
            prompt_embedding = prompt_embedding.unsqueeze(0)
        h = self.stack(prompt_embedding)
        out = self.mdn_proj(h)
        k, d = self.config.num_mixtures, self.embed_dim
        logits = out[..., :k]
        means = out[..., k : k + k * d].reshape(*out.shape[:-1], k, d)
        log_scales = out[..., k + k * d :].reshape(*out.shape[:-1], k, d)
        weights = torch.softmax(logits, dim=-1)
        scales = torch.clamp(torch.exp(log_scales), min=self.config.scale_floor)
        if squeeze:
            weights, means, scales = weights[0], means[0], scales[0]
        return GMMParams(weights=weights, means=means, scales=scales)

    def predict_vector(self, prompt_embedding: Tensor) -> Tensor:
        """Direct embedding prediction for the no-mixture ablation."""
        if self.use_mdn:
            raise RuntimeError("vector head disabled (mixture mode)")
        return self.vector_proj(self.stack(prompt_embedding))

    def forward(self, texts: Sequence[str]):
        emb = self.embed(texts)
        if self.use_mdn:
            return self.density(emb)
        return self.predict_vector(emb)
