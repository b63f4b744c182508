"""Gaussian mixture density primitives.

One implementation serves both mixture heads: the style head (K mixtures
over unit-norm embeddings) and the duration head (per-phone mixtures over
scalar log-durations).  The negative log-likelihood is computed through a
log-sum-exp over components; a non-finite result raises instead of being
clamped, since it signals scale underflow in the head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import Tensor

_WEIGHT_TOL = 1e-6


@dataclass
class GMMParams:
    """Diagonal Gaussian mixture: weights [..., K], means/scales [..., K, D]."""

    weights: Tensor
    means: Tensor
    scales: Tensor

    def __post_init__(self):
        if self.means.shape != self.scales.shape:
            raise ValueError("means and scales must share a shape")
        if self.weights.shape != self.means.shape[:-1]:
            raise ValueError(
                f"weights {tuple(self.weights.shape)} incompatible with means "
                f"{tuple(self.means.shape)}"
            )
        with torch.no_grad():
            if (self.weights < -_WEIGHT_TOL).any():
                raise ValueError("mixture weights must be non-negative")
            total = self.weights.sum(dim=-1)
            if (total - 1.0).abs().max().item() > _WEIGHT_TOL:
                raise ValueError("mixture weights must sum to 1")
            if (self.scales <= 0).any():
                raise ValueError("mixture scales must be positive")

    @property
    def num_components(self) -> int:
        return self.weights.shape[-1]

    @property
    def dim(self) -> int:
        return self.means.shape[-1]


def mdn_nll(gmm: GMMParams, target: Tensor) -> Tensor:
    """Mixture negative log-likelihood, reduced over the last (feature) axis.

    ``target`` broadcasts against the mixture's leading axes; the result has
    the weights' leading shape (a scalar for an unbatched mixture).
    """
    x = target.unsqueeze(-2)  # [..., 1, D]
    var_term = ((x - gmm.means) / gmm.scales) ** 2  # [..., K, D]
    log_norm = gmm.scales.log().sum(dim=-1) + 0.5 * gmm.dim * math.log(2.0 * math.pi)
    log_prob = -0.5 * var_term.sum(dim=-1) - log_norm  # [..., K]
    log_mix = torch.logsumexp(torch.log(gmm.weights.clamp_min(1e-30)) + log_prob, dim=-1)
    nll = -log_mix
    if not torch.isfinite(nll).all():
        raise FloatingPointError("non-finite mixture NLL (scale underflow or bad input)")
    return nll


def mdn_sample(
    gmm: GMMParams,
    generator: torch.Generator | None = None,
    temperature: float = 1.0,
    size: int | None = None,
    normalize: bool = True,
    return_components: bool = False,
):
    """Ancestral sampling from an unbatched mixture.

    Picks a component from the weights, then draws from its diagonal
    Gaussian with the scales multiplied by ``temperature`` (0 collapses to
    the component mean).  With ``normalize`` the draws are projected to unit
    norm, matching the conditioning convention for style embeddings.
    """
    if gmm.weights.dim() != 1:
        raise ValueError("mdn_sample expects an unbatched mixture")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    n = 1 if size is None else size
    components = torch.multinomial(
        gmm.weights.expand(n, -1), num_samples=1, replacement=True, generator=generator
    ).squeeze(-1)  # [n]
    means = gmm.means[components]  # [n, D]
    scales = gmm.scales[components]
    noise = torch.randn(means.shape, generator=generator, dtype=means.dtype)
    draws = means + scales * temperature * noise
    if normalize:
        norms = draws.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        draws = draws / norms
    if size is None:
        draws = draws.squeeze(0)
        components = components.squeeze(0)
    if return_components:
        return draws, components
    return draws


def argmax_component_mean(gmm: GMMParams, normalize: bool = True) -> Tensor:
    """Mean of the highest-weight component (deterministic sampling mode)."""
    if gmm.weights.dim() != 1:
        raise ValueError("argmax_component_mean expects an unbatched mixture")
    k = int(torch.argmax(gmm.weights).item())
    mean = gmm.means[k]
    if normalize:
        mean = mean / mean.norm().clamp_min(1e-12)
    return mean


def cosine_loss(pred: Tensor, target: Tensor) -> Tensor:
    """1 - cosine similarity; used by the no-mixture style head ablation."""
    pred_norm = pred.norm(dim=-1)
    if (pred_norm == 0).any():
        raise ValueError("cosine_loss: zero-norm prediction")
    cos = (pred * target).sum(dim=-1) / (pred_norm * target.norm(dim=-1).clamp_min(1e-12))
    return (1.0 - cos).mean()
