"""HTTP service exposing synthesis, analysis, and prompt operations.

The app wraps a single loaded checkpoint. Endpoints that need a model
return 409 until one is available; inference errors map to 400 so the
client can distinguish bad requests from a missing model.
"""

from __future__ import annotations

import base64
import binascii
import io
import logging
from pathlib import Path
from random import Random

import numpy as np
from fastapi import FastAPI, HTTPException
from scipy.io import wavfile

from .. import __version__
from ..analysis import AnalysisError, analyze_embeddings
from ..data.manifest import ManifestError, load_manifest, load_speaker_prompts
from ..dataset import DatasetError, build_training_examples, decode_waveform, load_levels
from ..features.cache import FeatureCache
from ..prompts.thresholds import StyleLevels
from ..prompts.templates import (
    TemplateError,
    compose_prompt,
    default_lexicon,
    default_templates,
    parse_style_prompt,
    render_style_prompt,
)
from ..synth import (
    ModelBundle,
    SynthesisError,
    SynthesisResult,
    synthesize,
    synthesize_from_reference,
)
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    ComposePromptRequest,
    ComposePromptResponse,
    ConfigResponse,
    EmbeddingRowModel,
    ErrorResponse,
    HealthResponse,
    ParsePromptRequest,
    ParsePromptResponse,
    RenderPromptRequest,
    RenderPromptResponse,
    SynthesizeReferenceRequest,
    SynthesizeRequest,
    SynthesizeResponse,
)

logger = logging.getLogger(__name__)

_BAD_REQUEST = (
    SynthesisError,
    AnalysisError,
    DatasetError,
    ManifestError,
    TemplateError,
    ValueError,
)

_ERROR_RESPONSES = {
    400: {"model": ErrorResponse},
    409: {"model": ErrorResponse},
}


def _waveform_base64(result: SynthesisResult, bundle: ModelBundle, iterations: int) -> str:
    wave = result.waveform(bundle.config, iterations=iterations)
    samples = np.clip(np.round(wave * 32767.0), -32768, 32767).astype(np.int16)
    buffer = io.BytesIO()
    wavfile.write(buffer, bundle.config.features.sample_rate_hz, samples)
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def _synthesis_response(
    result: SynthesisResult,
    bundle: ModelBundle,
    return_waveform: bool,
    iterations: int,
) -> SynthesizeResponse:
    return SynthesizeResponse(
        frames=result.mel.shape[0],
        mel_bins=result.mel.shape[1],
        mel=result.mel.tolist(),
        durations=[int(d) for d in result.durations],
        log_f0=result.log_f0.tolist(),
        vuv=result.vuv.tolist(),
        phonemes=result.phonemes,
        prompt=result.prompt,
        sample_rate_hz=bundle.config.features.sample_rate_hz,
        waveform_base64=(
            _waveform_base64(result, bundle, iterations) if return_waveform else None
        ),
    )


def create_app(checkpoint: str | Path | None = None) -> FastAPI:
    """Build the service, optionally loading a checkpoint at startup."""
    app = FastAPI(title="promptvoice", version=__version__)
    app.state.bundle = ModelBundle.load(checkpoint) if checkpoint else None

    def bundle_or_409() -> ModelBundle:
        bundle = app.state.bundle
        if bundle is None:
            raise HTTPException(status_code=409, detail="no checkpoint loaded")
        return bundle

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(checkpoint_loaded=app.state.bundle is not None)

    @app.get("/config", response_model=ConfigResponse, responses=_ERROR_RESPONSES)
    def config() -> ConfigResponse:
        bundle = bundle_or_409()
        return ConfigResponse(config=bundle.config.to_dict(), config_hash=bundle.config.hash())

    @app.post("/synthesize", response_model=SynthesizeResponse, responses=_ERROR_RESPONSES)
    def synthesize_endpoint(request: SynthesizeRequest) -> SynthesizeResponse:
        bundle = bundle_or_409()
        try:
            result = synthesize(
                bundle,
                request.text,
                request.style_prompt,
                speaker_prompt=request.speaker_prompt,
                seed=request.seed,
                sampling=request.sampling,
                temperature=request.temperature,
            )
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _synthesis_response(
            result, bundle, request.return_waveform, request.waveform_iterations
        )

    @app.post(
        "/synthesize/reference",
        response_model=SynthesizeResponse,
        responses=_ERROR_RESPONSES,
    )
    def synthesize_reference_endpoint(
        request: SynthesizeReferenceRequest,
    ) -> SynthesizeResponse:
        bundle = bundle_or_409()
        try:
            raw = base64.b64decode(request.reference_wav_base64, validate=True)
        except (binascii.Error, ValueError):
            raise HTTPException(status_code=400, detail="reference_wav_base64 is not valid base64")
        try:
            waveform = decode_waveform(
                io.BytesIO(raw),
                bundle.config.features.sample_rate_hz,
                label="reference upload",
            )
            result = synthesize_from_reference(
                bundle, request.text, waveform, seed=request.seed
            )
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _synthesis_response(
            result, bundle, request.return_waveform, request.waveform_iterations
        )

    @app.post("/analyze", response_model=AnalyzeResponse, responses=_ERROR_RESPONSES)
    def analyze_endpoint(request: AnalyzeRequest) -> AnalyzeResponse:
        bundle = bundle_or_409()
        try:
            records = load_manifest(request.manifest)
            cache = FeatureCache(request.cache_dir, bundle.config)
            levels = load_levels(request.levels)
            prompts = (
                load_speaker_prompts(request.speaker_prompts)
                if request.speaker_prompts
                else None
            )
            examples = build_training_examples(records, cache, levels, prompts, bundle.vocab)
            report = analyze_embeddings(
                bundle,
                examples,
                mode=request.mode,
                projection=request.projection,
                seed=request.seed,
                use_speaker_prompt=request.use_speaker_prompt,
                sampling=request.sampling,
                temperature=request.temperature,
            )
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return AnalyzeResponse(
            separation=report.separation,
            mode=report.mode,
            projection=report.projection,
            seed=report.seed,
            rows=[
                EmbeddingRowModel(
                    utterance_id=row.utterance_id,
                    speaker_id=row.speaker_id,
                    source=row.source,
                    x=row.x,
                    y=row.y,
                )
                for row in report.rows
            ],
        )

    @app.post(
        "/prompts/render", response_model=RenderPromptResponse, responses=_ERROR_RESPONSES
    )
    def render_endpoint(request: RenderPromptRequest) -> RenderPromptResponse:
        levels = StyleLevels(
            pitch=request.pitch, speed=request.speed, loudness=request.loudness
        )
        try:
            text = render_style_prompt(
                levels, request.gender, default_templates(), Random(request.seed)
            )
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RenderPromptResponse(style_prompt=text)

    @app.post(
        "/prompts/compose", response_model=ComposePromptResponse, responses=_ERROR_RESPONSES
    )
    def compose_endpoint(request: ComposePromptRequest) -> ComposePromptResponse:
        try:
            text = compose_prompt(request.speaker_prompt, request.style_prompt)
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return ComposePromptResponse(prompt=text)

    @app.post(
        "/prompts/parse", response_model=ParsePromptResponse, responses=_ERROR_RESPONSES
    )
    def parse_endpoint(request: ParsePromptRequest) -> ParsePromptResponse:
        try:
            levels, gender = parse_style_prompt(
                request.style_prompt, default_templates(), default_lexicon()
            )
        except _BAD_REQUEST as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return ParsePromptResponse(
            pitch=levels.pitch, speed=levels.speed, loudness=levels.loudness, gender=gender
        )

    return app
