"""Request/response models shared by the HTTP service and the CLI client."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    checkpoint_loaded: bool


class ConfigResponse(BaseModel):
    config: dict
    config_hash: str


class SynthesizeRequest(BaseModel):
    text: str = Field(min_length=1)
    style_prompt: str = Field(min_length=1)
    speaker_prompt: str | None = None
    seed: int = 0
    sampling: Literal["sample", "argmax"] = "sample"
    temperature: float = Field(default=1.0, ge=0.0)
    return_waveform: bool = False
    waveform_iterations: int = Field(default=60, ge=1, le=500)


class SynthesizeReferenceRequest(BaseModel):
    text: str = Field(min_length=1)
    reference_wav_base64: str = Field(min_length=1)
    seed: int = 0
    return_waveform: bool = False
    waveform_iterations: int = Field(default=60, ge=1, le=500)


class SynthesizeResponse(BaseModel):
    frames: int
    mel_bins: int
    mel: list[list[float]]
    durations: list[int]
    log_f0: list[float]
    vuv: list[float]
    phonemes: list[str]
    prompt: str | None
    sample_rate_hz: int
    waveform_base64: str | None = None


class AnalyzeRequest(BaseModel):
    """Analysis over a server-side prepared corpus."""

    manifest: str
    cache_dir: str
    levels: str
    speaker_prompts: str | None = None
    mode: Literal["reference", "prompt"] = "reference"
    projection: Literal["pca", "tsne"] = "pca"
    seed: int = 0
    use_speaker_prompt: bool = True
    sampling: Literal["sample", "argmax"] = "sample"
    temperature: float = Field(default=1.0, ge=0.0)


class EmbeddingRowModel(BaseModel):
    utterance_id: str
    speaker_id: str
    source: str
    x: float
    y: float


class AnalyzeResponse(BaseModel):
    separation: float
    mode: str
    projection: str
    seed: int
    rows: list[EmbeddingRowModel]


class RenderPromptRequest(BaseModel):
    pitch: Literal["low", "normal", "high"]
    speed: Literal["slow", "normal", "fast"]
    loudness: Literal["low", "normal", "high"]
    gender: Literal["female", "male"]
    seed: int = 0


class RenderPromptResponse(BaseModel):
    style_prompt: str


class ComposePromptRequest(BaseModel):
    style_prompt: str = Field(min_length=1)
    speaker_prompt: str | None = None


class ComposePromptResponse(BaseModel):
    prompt: str


class ParsePromptRequest(BaseModel):
    style_prompt: str = Field(min_length=1)


class ParsePromptResponse(BaseModel):
    pitch: str
    speed: str
    loudness: str
    gender: str


class ErrorResponse(BaseModel):
    detail: str
