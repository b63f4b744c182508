"""Full prompt-conditioned acoustic model.

Wires together the reference encoder, prompt encoder, Conformer content
encoder, variance adaptor, and diffusion decoder.  During training the style
embedding comes from the reference encoder (mel input) and the prompt
encoder's mixture is fit to it; at inference the style is drawn from the
mixture instead.  Ground-truth pitch conditions the decoder while training
(teacher forcing); predicted pitch is used when synthesizing.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
from torch import Tensor

from promptvoice.config import Config
from promptvoice.model.content_encoder import ContentEncoder
from promptvoice.model.diffusion import DiffusionDecoder, DiffusionSchedule, generate
from promptvoice.model.mdn import GMMParams
from promptvoice.model.prompt_encoder import PromptEncoder, TextBackbone
from promptvoice.model.reference_encoder import ReferenceEncoder
from promptvoice.model.variance_adaptor import (
    DurationPredictor,
    PitchEmbedding,
    PitchPredictor,
    length_regulate,
)


@dataclass
class AcousticOutputs:
    """Teacher-forced predictions for one training batch."""

    duration_gmm: GMMParams  # weights [B, L, K]; means/scales [B, L, K, 1]
    log_f0_hat: Tensor  # [B, T]
    vuv_hat: Tensor  # [B, T]
    decoder_cond: Tensor  # [B, T, hidden]


@dataclass
class SynthesisOutputs:
    """Inference products for a single utterance."""

    mel: Tensor  # [T, bins], normalized domain
    durations: Tensor  # [L] frames
    log_f0: Tensor  # [T]
    vuv: Tensor  # [T] probabilities


def regulate_batch(hidden: Tensor, durations: Tensor) -> tuple[Tensor, Tensor]:
    """Batched length regulation with right padding.

    ``hidden`` [B, L, D] and ``durations`` [B, L] -> (frames [B, Tmax, D],
    valid mask [B, Tmax] with True at real frames).
    """
    expanded = [length_regulate(h, d) for h, d in zip(hidden, durations)]
    lengths = [e.shape[0] for e in expanded]
    t_max = max(lengths) if lengths else 0
    if t_max == 0:
        raise ValueError("all utterances regulate to zero frames")
    out = hidden.new_zeros(hidden.shape[0], t_max, hidden.shape[2])
    mask = torch.zeros(hidden.shape[0], t_max, dtype=torch.bool, device=hidden.device)
    for i, e in enumerate(expanded):
        out[i, : e.shape[0]] = e
        mask[i, : e.shape[0]] = True
    return out, mask


class PromptVoiceModel(nn.Module):
    """Prompt/reference style encoders plus the style-conditioned synthesizer."""

    def __init__(self, vocab_size: int, config: Config, backbone: TextBackbone | None = None):
        super().__init__()
        self.config = config
        hidden = config.acoustic.hidden_dim
        embed_dim = config.reference_encoder.embed_dim

        self.reference_encoder = ReferenceEncoder(config.features.mel_bins, config.reference_encoder)
        self.prompt_encoder = PromptEncoder(config.prompt_encoder, embed_dim, backbone=backbone)
        self.content_encoder = ContentEncoder(vocab_size, config.acoustic, config.reference_encoder)
        self.duration_predictor = DurationPredictor(hidden, config.acoustic)
        self.pitch_predictor = PitchPredictor(hidden, config.acoustic)
        self.pitch_embedding = PitchEmbedding(hidden)
        # Style re-enters at the predictor inputs and the decoder conditioning
        # in addition to the content-encoder bias.
        self.duration_style = nn.Linear(embed_dim, hidden)
        self.pitch_style = nn.Linear(embed_dim, hidden)
        self.decoder_style = nn.Linear(embed_dim, hidden)
        self.decoder = DiffusionDecoder(config.features.mel_bins, hidden, config.acoustic)
        self.schedule = DiffusionSchedule.from_config(config.acoustic)

    def encode_reference(self, mel: Tensor) -> Tensor:
        """Mel [T, bins] or [B, T, bins] -> unit-norm style embedding."""
        return self.reference_encoder(mel)

    def forward(
        self,
        phoneme_ids: Tensor,
        phone_pad_mask: Tensor,
        durations: Tensor,
        style: Tensor,
        log_f0: Tensor,
        vuv: Tensor,
    ) -> AcousticOutputs:
        """Teacher-forced pass over a padded batch.

        ``phoneme_ids`` [B, L]; ``phone_pad_mask`` True at padding;
        ``durations`` [B, L] target frame counts (0 on padding); ``style``
        [B, embed_dim]; ``log_f0``/``vuv`` [B, T] aligned to the target mel.
        """
        hidden = self.content_encoder(phoneme_ids, style, pad_mask=phone_pad_mask)
        dur_in = hidden + self.duration_style(style).unsqueeze(1)
        duration_gmm = self.duration_predictor(dur_in)

        frames_hidden, frame_mask = regulate_batch(hidden, durations)
        if frames_hidden.shape[1] != log_f0.shape[1]:
            raise ValueError(
                f"regulated frames {frames_hidden.shape[1]} != pitch frames {log_f0.shape[1]}"
            )
        pitch_in = frames_hidden + self.pitch_style(style).unsqueeze(1)
        log_f0_hat, vuv_hat = self.pitch_predictor(pitch_in)

        cond = (
            frames_hidden
            + self.decoder_style(style).unsqueeze(1)
            + self.pitch_embedding(log_f0, vuv.to(log_f0.dtype))
        )
        cond = cond.masked_fill(~frame_mask.unsqueeze(-1), 0.0)
        return AcousticOutputs(
            duration_gmm=duration_gmm,
            log_f0_hat=log_f0_hat,
            vuv_hat=vuv_hat,
            decoder_cond=cond,
        )

    @torch.no_grad()
    def synthesize(
        self,
        phoneme_ids: Tensor,
        style: Tensor,
        generator: torch.Generator | None = None,
    ) -> SynthesisOutputs:
        """Generate one utterance from phoneme ids [L] and a style vector."""
        if phoneme_ids.dim() != 1 or phoneme_ids.numel() == 0:
            raise ValueError("phoneme_ids must be a non-empty 1-D id sequence")
        if style.dim() != 1:
            raise ValueError("style must be a single embedding vector")
        was_training = self.training
        self.eval()
        try:
            ids = phoneme_ids.unsqueeze(0)
            sty = style.unsqueeze(0)
            hidden = self.content_encoder(ids, sty)
            dur_gmm = self.duration_predictor(hidden + self.duration_style(sty).unsqueeze(1))
            frames = DurationPredictor.frames_from_mixture(dur_gmm)[0]  # [L]
            frame_hidden = length_regulate(hidden[0], frames).unsqueeze(0)
            log_f0, vuv = self.pitch_predictor(
                frame_hidden + self.pitch_style(sty).unsqueeze(1)
            )
            voiced = (vuv >= 0.5).to(log_f0.dtype)
            cond = (
                frame_hidden
                + self.decoder_style(sty).unsqueeze(1)
                + self.pitch_embedding(log_f0, voiced)
            )
            mel = generate(
                lambda x_t, t: self.decoder(x_t, t, cond),
                (1, frame_hidden.shape[1], self.config.features.mel_bins),
                self.schedule,
                generator=generator,
            )
        finally:
            self.train(was_training)
        return SynthesisOutputs(
            mel=mel[0], durations=frames, log_f0=log_f0[0], vuv=vuv[0]
        )
