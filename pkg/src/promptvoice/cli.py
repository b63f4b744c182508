"""Command-line entry points.

Data preparation and training run locally. Inference and analysis commands
run locally against a checkpoint by default, or act as thin clients against
a running service when ``--server`` is given.
"""

from __future__ import annotations

import base64
import json
import sys
from pathlib import Path
from random import Random

import click
import numpy as np
import yaml

from .config import Config, resolve_config, save_config
from .data.manifest import load_manifest, load_speaker_prompts, save_manifest
from .dataset import (
    assign_corpus_levels,
    attach_durations,
    build_training_examples,
    build_vocabulary,
    extract_features,
    load_levels,
    load_stats,
    save_levels,
    save_stats,
)
from .features.cache import FeatureCache
from .prompts.templates import (
    default_lexicon,
    default_templates,
    load_lexicon,
    load_templates,
    render_style_prompt,
)
from .prompts.thresholds import compute_thresholds

SAMPLING_CHOICE = click.Choice(["sample", "argmax"])


def _echo_kv(key: str, value) -> None:
    click.echo(f"{key}: {value}")


def _load_config_with_overrides(
    config_path: str | None,
    seed: int | None = None,
    no_speaker_prompt: bool = False,
    no_mdn: bool = False,
) -> Config:
    document = {}
    if config_path:
        document = yaml.safe_load(Path(config_path).read_text(encoding="utf-8")) or {}
    if seed is not None:
        document.setdefault("training", {})["seed"] = seed
    if no_speaker_prompt:
        document.setdefault("training", {})["use_speaker_prompt"] = False
    if no_mdn:
        document.setdefault("prompt_encoder", {})["use_mdn"] = False
    return resolve_config(document)


def _load_template_options(templates_path: str | None, lexicon_path: str | None):
    templates = load_templates(templates_path) if templates_path else default_templates()
    lexicon = load_lexicon(lexicon_path) if lexicon_path else default_lexicon()
    return templates, lexicon


def _write_mel(mel: np.ndarray, path: str) -> None:
    np.save(path, mel.astype(np.float32))


def _write_wav_int16(path: str | Path, wave: np.ndarray, rate: int) -> None:
    from scipy.io import wavfile

    samples = np.clip(np.round(wave * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, rate, samples)


def _post(server: str, endpoint: str, payload: dict) -> dict:
    import httpx

    response = httpx.post(f"{server.rstrip('/')}{endpoint}", json=payload, timeout=600.0)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"server returned {response.status_code}: {detail}")
    return response.json()


def _save_remote_synthesis(body: dict, out: str, wav: str | None) -> None:
    _write_mel(np.asarray(body["mel"], dtype=np.float32), out)
    _echo_kv("frames", body["frames"])
    _echo_kv("phones", " ".join(body["phonemes"]))
    if body.get("prompt"):
        _echo_kv("prompt", body["prompt"])
    _echo_kv("mel", out)
    if wav:
        if not body.get("waveform_base64"):
            raise click.ClickException("server response carried no waveform")
        Path(wav).write_bytes(base64.b64decode(body["waveform_base64"]))
        _echo_kv("wav", wav)


@click.group()
def main() -> None:
    """Prompt-controlled speech synthesis toolkit."""


@main.command("prepare-data")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--audio-root", default=".", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--alignments",
    default=None,
    type=click.Path(exists=True, file_okay=False),
    help="Directory of <utterance_id>.lab files; fills phones/durations.",
)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def prepare_data(manifest, audio_root, alignments, config_path, out_dir) -> None:
    """Ingest a manifest: attach alignments, extract features, compute stats."""
    config = _load_config_with_overrides(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = load_manifest(manifest)
    if alignments:
        records = attach_durations(records, alignments, config, audio_root=audio_root)
    resolved_manifest = out / "manifest.jsonl"
    save_manifest(records, resolved_manifest)

    cache = FeatureCache(out / "cache", config)
    rows = extract_features(records, config, cache, audio_root=audio_root)
    stats_path = out / "stats.jsonl"
    save_stats(rows, stats_path)
    save_config(config, out / "config.yaml")

    _echo_kv("records", len(records))
    _echo_kv("manifest", resolved_manifest)
    _echo_kv("cache", cache.cache_dir)
    _echo_kv("stats", stats_path)


@main.command("make-style-prompts")
@click.option("--stats", "stats_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--lexicon", "lexicon_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--preview", default=0, show_default=True, help="Print N sample prompts.")
@click.option("--seed", default=0, show_default=True)
def make_style_prompts(stats_path, out_dir, templates_path, lexicon_path, preview, seed) -> None:
    """Bin utterance statistics into per-gender levels and save thresholds."""
    rows = load_stats(stats_path)
    table = compute_thresholds([(row.stats, row.gender) for row in rows])
    levels = assign_corpus_levels(rows, table)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    thresholds_path = out / "thresholds.json"
    table.save(thresholds_path)
    levels_path = out / "levels.jsonl"
    save_levels(levels, levels_path)

    _echo_kv("utterances", len(rows))
    _echo_kv("thresholds", thresholds_path)
    _echo_kv("levels", levels_path)
    if preview > 0:
        templates, lexicon = _load_template_options(templates_path, lexicon_path)
        rng = Random(seed)
        for row in rows[:preview]:
            text = render_style_prompt(levels[row.utterance_id], row.gender, templates, rng, lexicon)
            click.echo(f"  {row.utterance_id}: {text}")


@main.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cache-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--levels", "levels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--speaker-prompts", "speaker_prompts_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--resume", "resume_from", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=None, type=int, help="Override training.seed.")
@click.option("--no-speaker-prompt", is_flag=True, help="Train from style prompts alone.")
@click.option("--no-mdn", is_flag=True, help="Deterministic prompt embedding + cosine style loss.")
@click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--lexicon", "lexicon_path", default=None, type=click.Path(exists=True, dir_okay=False))
def train_command(
    manifest,
    cache_dir,
    levels_path,
    speaker_prompts_path,
    config_path,
    out_dir,
    resume_from,
    seed,
    no_speaker_prompt,
    no_mdn,
    templates_path,
    lexicon_path,
) -> None:
    """Train the acoustic model + prompt encoder; write checkpoints and logs."""
    from .train.loop import train

    config = _load_config_with_overrides(
        config_path, seed=seed, no_speaker_prompt=no_speaker_prompt, no_mdn=no_mdn
    )
    records = load_manifest(manifest)
    vocab = build_vocabulary(records)
    cache = FeatureCache(cache_dir, config)
    levels = load_levels(levels_path)
    prompts = load_speaker_prompts(speaker_prompts_path) if speaker_prompts_path else None
    examples = build_training_examples(records, cache, levels, prompts, vocab)
    templates, lexicon = _load_template_options(templates_path, lexicon_path)

    result = train(
        config,
        examples,
        vocab,
        out_dir,
        resume_from=resume_from,
        templates=templates,
        lexicon=lexicon,
    )
    _echo_kv("steps", result.steps)
    _echo_kv("epochs", result.epochs_completed)
    _echo_kv("checkpoint", result.final_checkpoint)
    _echo_kv("loss-log", result.loss_log)
    if result.last_losses:
        _echo_kv("final-losses", json.dumps(result.last_losses))


@main.command("synthesize")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="Service base URL; replaces --checkpoint.")
@click.option("--text", required=True)
@click.option("--style-prompt", required=True)
@click.option("--speaker-prompt", default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--sampling", type=SAMPLING_CHOICE, default="sample", show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output mel .npy path.")
@click.option("--wav", default=None, type=click.Path(dir_okay=False), help="Optional low-fidelity waveform.")
@click.option("--wav-iterations", default=60, show_default=True)
def synthesize_command(
    checkpoint, server, text, style_prompt, speaker_prompt, seed, sampling,
    temperature, out, wav, wav_iterations,
) -> None:
    """Synthesize a mel spectrogram from text plus natural-language prompts."""
    if server:
        body = _post(
            server,
            "/synthesize",
            {
                "text": text,
                "style_prompt": style_prompt,
                "speaker_prompt": speaker_prompt,
                "seed": seed,
                "sampling": sampling,
                "temperature": temperature,
                "return_waveform": wav is not None,
                "waveform_iterations": wav_iterations,
            },
        )
        _save_remote_synthesis(body, out, wav)
        return
    if not checkpoint:
        raise click.UsageError("provide --checkpoint or --server")

    from .synth import ModelBundle, synthesize

    bundle = ModelBundle.load(checkpoint)
    result = synthesize(
        bundle,
        text,
        style_prompt,
        speaker_prompt=speaker_prompt,
        seed=seed,
        sampling=sampling,
        temperature=temperature,
    )
    _write_mel(result.mel, out)
    _echo_kv("frames", result.mel.shape[0])
    _echo_kv("phones", " ".join(result.phonemes))
    _echo_kv("prompt", result.prompt)
    _echo_kv("mel", out)
    if wav:
        wave = result.waveform(bundle.config, iterations=wav_iterations, seed=seed)
        _write_wav_int16(wav, wave, bundle.config.features.sample_rate_hz)
        _echo_kv("wav", wav)


@main.command("synthesize-ref")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="Service base URL; replaces --checkpoint.")
@click.option("--text", required=True)
@click.option("--reference", required=True, type=click.Path(exists=True, dir_okay=False), help="Reference WAV providing the style.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output mel .npy path.")
@click.option("--wav", default=None, type=click.Path(dir_okay=False), help="Optional low-fidelity waveform.")
@click.option("--wav-iterations", default=60, show_default=True)
def synthesize_ref_command(checkpoint, server, text, reference, seed, out, wav, wav_iterations) -> None:
    """Synthesize a mel spectrogram, taking the style from reference speech."""
    if server:
        body = _post(
            server,
            "/synthesize/reference",
            {
                "text": text,
                "reference_wav_base64": base64.b64encode(Path(reference).read_bytes()).decode("ascii"),
                "seed": seed,
                "return_waveform": wav is not None,
                "waveform_iterations": wav_iterations,
            },
        )
        _save_remote_synthesis(body, out, wav)
        return
    if not checkpoint:
        raise click.UsageError("provide --checkpoint or --server")

    from .synth import ModelBundle, synthesize_from_reference

    bundle = ModelBundle.load(checkpoint)
    result = synthesize_from_reference(bundle, text, reference, seed=seed)
    _write_mel(result.mel, out)
    _echo_kv("frames", result.mel.shape[0])
    _echo_kv("phones", " ".join(result.phonemes))
    _echo_kv("mel", out)
    if wav:
        wave = result.waveform(bundle.config, iterations=wav_iterations, seed=seed)
        _write_wav_int16(wav, wave, bundle.config.features.sample_rate_hz)
        _echo_kv("wav", wav)


@main.command("analyze-embeddings")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="Service base URL; replaces --checkpoint.")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cache-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--levels", "levels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--speaker-prompts", "speaker_prompts_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["reference", "prompt"]), default="reference", show_default=True)
@click.option("--projection", type=click.Choice(["pca", "tsne"]), default="pca", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--sampling", type=SAMPLING_CHOICE, default="sample", show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--no-speaker-prompt", is_flag=True, help="Render prompts without the speaker sentence.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output TSV path.")
def analyze_command(
    checkpoint, server, manifest, cache_dir, levels_path, speaker_prompts_path,
    mode, projection, seed, sampling, temperature, no_speaker_prompt, out,
) -> None:
    """Project per-utterance style embeddings to 2-D and score speaker clustering."""
    if server:
        body = _post(
            server,
            "/analyze",
            {
                "manifest": str(Path(manifest).resolve()),
                "cache_dir": str(Path(cache_dir).resolve()),
                "levels": str(Path(levels_path).resolve()),
                "speaker_prompts": (
                    str(Path(speaker_prompts_path).resolve()) if speaker_prompts_path else None
                ),
                "mode": mode,
                "projection": projection,
                "seed": seed,
                "use_speaker_prompt": not no_speaker_prompt,
                "sampling": sampling,
                "temperature": temperature,
            },
        )
        from .analysis import EmbeddingReport, EmbeddingRow

        report = EmbeddingReport(
            rows=[EmbeddingRow(**row) for row in body["rows"]],
            separation=body["separation"],
            mode=body["mode"],
            projection=body["projection"],
            seed=body["seed"],
        )
    else:
        if not checkpoint:
            raise click.UsageError("provide --checkpoint or --server")

        from .analysis import analyze_embeddings
        from .synth import ModelBundle

        bundle = ModelBundle.load(checkpoint)
        records = load_manifest(manifest)
        cache = FeatureCache(cache_dir, bundle.config)
        levels = load_levels(levels_path)
        prompts = load_speaker_prompts(speaker_prompts_path) if speaker_prompts_path else None
        examples = build_training_examples(records, cache, levels, prompts, bundle.vocab)
        report = analyze_embeddings(
            bundle,
            examples,
            mode=mode,
            projection=projection,
            seed=seed,
            use_speaker_prompt=not no_speaker_prompt,
            sampling=sampling,
            temperature=temperature,
        )
    report.save_tsv(out)
    _echo_kv("utterances", len(report.rows))
    _echo_kv("separation", f"{report.separation:.6f}")
    _echo_kv("report", out)


@main.command("serve")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_command(checkpoint, host, port) -> None:
    """Run the HTTP service (endpoints usable without a checkpoint return 409)."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(checkpoint), host=host, port=port)


@main.command("make-toy-corpus")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--utterances-per-speaker", default=10, show_default=True)
@click.option("--seed", default=2024, show_default=True)
def make_toy_corpus_command(out_dir, utterances_per_speaker, seed) -> None:
    """Generate the 4-speaker synthetic corpus plus a matching small config."""
    from .toydata import make_toy_corpus, toy_config

    config = toy_config()
    corpus = make_toy_corpus(
        out_dir, config=config, utterances_per_speaker=utterances_per_speaker, seed=seed
    )
    config_path = corpus.root / "config.yaml"
    save_config(config, config_path)
    _echo_kv("records", len(corpus.records))
    _echo_kv("manifest", corpus.manifest_path)
    _echo_kv("speaker-prompts", corpus.speaker_prompts_path)
    _echo_kv("config", config_path)


if __name__ == "__main__":
    sys.exit(main())
