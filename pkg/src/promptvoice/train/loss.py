"""Composite training objective: L = L_dec + L_dur + L_pitch + L_style.

Duration and style terms are mixture negative log-likelihoods; the pitch
term is the sum of two L1 losses (log-F0 and V/UV); the decoder term is the
diffusion eps-matching L1.  The style target is the reference-encoder
output under stop-gradient, so the style loss trains only the prompt
encoder side.  All per-frame/per-phone terms are averaged over unpadded
positions only.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

from promptvoice.model.diffusion import DiffusionSchedule, diffusion_loss
from promptvoice.model.mdn import GMMParams, cosine_loss, mdn_nll
from promptvoice.train.batching import CollatedBatch


@dataclass
class LossBreakdown:
    l_dec: Tensor
    l_dur: Tensor
    l_pitch: Tensor
    l_style: Tensor
    total: Tensor

    @classmethod
    def combine(
        cls,
        l_dec: Tensor,
        l_dur: Tensor,
        l_pitch: Tensor,
        l_style: Tensor,
        weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    ) -> "LossBreakdown":
        total = (
            weights[0] * l_dec
            + weights[1] * l_dur
            + weights[2] * l_pitch
            + weights[3] * l_style
        )
        return cls(l_dec=l_dec, l_dur=l_dur, l_pitch=l_pitch, l_style=l_style, total=total)

    def to_floats(self) -> dict[str, float]:
        return {
            "l_dec": float(self.l_dec.detach()),
            "l_dur": float(self.l_dur.detach()),
            "l_pitch": float(self.l_pitch.detach()),
            "l_style": float(self.l_style.detach()),
            "total": float(self.total.detach()),
        }


def _masked_mean(values: Tensor, mask: Tensor) -> Tensor:
    weights = mask.to(values.dtype)
    denom = weights.sum()
    if float(denom) == 0.0:
        raise ValueError("mask excludes every element")
    return (values * weights).sum() / denom


def duration_loss(gmm: GMMParams, durations: Tensor, phone_pad_mask: Tensor) -> Tensor:
    """Mixture NLL of log frame counts over real phones.

    Zero-duration phones (silence absorbed elsewhere by the aligner) carry
    no log-duration target and are excluded alongside padding.
    """
    valid = (~phone_pad_mask) & (durations > 0)
    target = torch.log(durations.clamp_min(1).to(gmm.means.dtype)).unsqueeze(-1)
    nll = mdn_nll(gmm, target)  # [B, L]
    return _masked_mean(nll, valid)


def pitch_loss(
    log_f0_hat: Tensor,
    vuv_hat: Tensor,
    log_f0: Tensor,
    vuv: Tensor,
    frame_mask: Tensor,
) -> tuple[Tensor, Tensor]:
    """The two L1 terms: continuous log-F0 and the V/UV flags."""
    l_f0 = _masked_mean((log_f0_hat - log_f0).abs(), frame_mask)
    l_vuv = _masked_mean((vuv_hat - vuv.to(vuv_hat.dtype)).abs(), frame_mask)
    return l_f0, l_vuv


def style_loss(prompt_out: GMMParams | Tensor, reference: Tensor) -> Tensor:
    """Prompt-encoder fit to the (stop-gradient) reference embedding.

    Mixture mode scores the reference under the predicted GMM; the
    no-mixture ablation falls back to cosine distance.
    """
    target = reference.detach()
    if isinstance(prompt_out, GMMParams):
        return mdn_nll(prompt_out, target).mean()
    return cosine_loss(prompt_out, target)


def total_loss(
    decoder,
    outputs,
    batch: CollatedBatch,
    prompt_out: GMMParams | Tensor,
    reference: Tensor,
    sched: DiffusionSchedule,
    generator: torch.Generator | None = None,
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    fixed_t: Tensor | None = None,
    fixed_noise: Tensor | None = None,
) -> LossBreakdown:
    """Assemble the four-term objective for one batch.

    ``decoder`` is the eps estimator called as decoder(x_t, t, cond);
    ``outputs`` are the teacher-forced model outputs (duration mixture,
    pitch predictions, decoder conditioning).  ``fixed_t``/``fixed_noise``
    pin the diffusion draw for deterministic evaluation.
    """
    l_dec = diffusion_loss(
        lambda x_t, t: decoder(x_t, t, outputs.decoder_cond),
        batch.mel,
        sched,
        generator=generator,
        mask=batch.frame_mask,
        t=fixed_t,
        noise=fixed_noise,
    )
    l_dur = duration_loss(outputs.duration_gmm, batch.durations, batch.phone_pad_mask)
    l_f0, l_vuv = pitch_loss(
        outputs.log_f0_hat, outputs.vuv_hat, batch.log_f0, batch.vuv, batch.frame_mask
    )
    l_style = style_loss(prompt_out, reference)
    return LossBreakdown.combine(l_dec, l_dur, l_f0 + l_vuv, l_style, weights)
