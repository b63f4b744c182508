from promptvoice.model.mdn import GMMParams, cosine_loss, mdn_nll, mdn_sample
from promptvoice.model.reference_encoder import ReferenceEncoder, StyleTokenAttention
from promptvoice.model.prompt_encoder import (
    MockTextBackbone,
    PretrainedTextBackbone,
    PromptEncoder,
    TextBackbone,
    build_backbone,
)
from promptvoice.model.vocab import PhonemeVocabulary
from promptvoice.model.content_encoder import ContentEncoder
from promptvoice.model.variance_adaptor import (
    DurationPredictor,
    PitchPredictor,
    length_regulate,
)
from promptvoice.model.diffusion import (
    DiffusionDecoder,
    DiffusionSchedule,
    denoise_step,
    diffusion_loss,
    generate,
    predict_x0,
    q_sample,
)
from promptvoice.model.full import PromptVoiceModel

__all__ = [
    "GMMParams",
    "cosine_loss",
    "mdn_nll",
    "mdn_sample",
    "ReferenceEncoder",
    "StyleTokenAttention",
    "MockTextBackbone",
    "PretrainedTextBackbone",
    "PromptEncoder",
    "TextBackbone",
    "build_backbone",
    "PhonemeVocabulary",
    "ContentEncoder",
    "DurationPredictor",
    "PitchPredictor",
    "length_regulate",
    "DiffusionDecoder",
    "DiffusionSchedule",
    "denoise_step",
    "diffusion_loss",
    "generate",
    "predict_x0",
    "q_sample",
    "PromptVoiceModel",
]
