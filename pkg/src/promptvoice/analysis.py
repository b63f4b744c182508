"""Embedding-space analysis: per-utterance style embeddings, 2-D projection,
and a speaker cluster-separation score.

The score is the mean intra-speaker cosine similarity minus the mean
inter-speaker cosine similarity over all utterance pairs, computed on the
full-dimensional unit-norm embeddings.  Projection is deterministic
principal components by default; stochastic neighbor embedding is opt-in
(requires scikit-learn) with a recorded seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from promptvoice.prompts.templates import (
    Lexicon,
    PromptTemplate,
    compose_prompt,
    default_lexicon,
    default_templates,
    render_style_prompt,
)
from promptvoice.synth import ModelBundle, style_from_prompt
from promptvoice.train.loop import TrainingExample

MODES = ("reference", "prompt")
PROJECTIONS = ("pca", "tsne")


class AnalysisError(RuntimeError):
    pass


@dataclass
class EmbeddingRow:
    utterance_id: str
    speaker_id: str
    source: str  # "reference" or "prompt-sampled"
    x: float
    y: float


@dataclass
class EmbeddingReport:
    rows: list[EmbeddingRow]
    separation: float
    mode: str
    projection: str
    seed: int | None = None
    embeddings: np.ndarray | None = field(default=None, repr=False)

    def save_tsv(self, path: str | Path) -> Path:
        path = Path(path)
        lines = [
            f"# mode\t{self.mode}",
            f"# projection\t{self.projection}",
            f"# seed\t{self.seed if self.seed is not None else '-'}",
            f"# separation\t{self.separation:.6f}",
            "utterance_id\tspeaker_id\tsource\tx\ty",
        ]
        for row in self.rows:
            lines.append(
                f"{row.utterance_id}\t{row.speaker_id}\t{row.source}"
                f"\t{row.x:.6f}\t{row.y:.6f}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def separation_score(embeddings: np.ndarray, speaker_ids: Sequence[str]) -> float:
    """Mean intra-speaker minus mean inter-speaker cosine similarity."""
    if len(speaker_ids) != embeddings.shape[0]:
        raise AnalysisError("one speaker id per embedding required")
    unit = embeddings / np.maximum(
        np.linalg.norm(embeddings, axis=1, keepdims=True), 1e-12
    )
    sim = unit @ unit.T
    ids = np.asarray(speaker_ids)
    same = ids[:, None] == ids[None, :]
    off_diag = ~np.eye(len(ids), dtype=bool)
    intra = sim[same & off_diag]
    inter = sim[~same]
    if intra.size == 0:
        raise AnalysisError("every speaker needs at least 2 utterances")
    if inter.size == 0:
        raise AnalysisError("at least 2 speakers required")
    return float(intra.mean() - inter.mean())


def project_pca(embeddings: np.ndarray) -> np.ndarray:
    """Deterministic 2-D principal-component projection."""
    centered = embeddings - embeddings.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2]
    # Fix the sign convention so the projection is reproducible across
    # LAPACK builds: largest-|loading| coordinate is positive.
    for i in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    coords = centered @ components.T
    if coords.shape[1] < 2:  # single-dimensional input
        coords = np.pad(coords, ((0, 0), (0, 2 - coords.shape[1])))
    return coords


def project_tsne(embeddings: np.ndarray, seed: int) -> np.ndarray:
    try:
        from sklearn.manifold import TSNE
    except ImportError:
        raise AnalysisError(
            "t-SNE projection needs scikit-learn; install the 'tsne' extra "
            "or use the default pca projection"
        ) from None
    perplexity = min(30.0, max(2.0, (embeddings.shape[0] - 1) / 3.0))
    tsne = TSNE(n_components=2, random_state=seed, init="pca", perplexity=perplexity)
    return tsne.fit_transform(embeddings)


def _collect_embeddings(
    bundle: ModelBundle,
    examples: Sequence[TrainingExample],
    mode: str,
    seed: int,
    use_speaker_prompt: bool,
    sampling: str,
    temperature: float,
    templates: Sequence[PromptTemplate] | None,
    lexicon: Lexicon | None,
) -> np.ndarray:
    model = bundle.model
    model.eval()
    templates = list(templates) if templates is not None else default_templates()
    lexicon = lexicon if lexicon is not None else default_lexicon()
    prompt_rng = random.Random(seed)
    generator = torch.Generator().manual_seed(seed)
    vectors = []
    with torch.no_grad():
        for ex in examples:
            if mode == "reference":
                mel = torch.from_numpy(
                    bundle.mel_stats.normalize(ex.mel).astype(np.float32)
                )
                emb = model.encode_reference(mel.unsqueeze(0))[0]
            else:
                style = render_style_prompt(
                    ex.levels, ex.gender, templates, prompt_rng, lexicon
                )
                speaker = ex.speaker_prompt if use_speaker_prompt else None
                prompt = compose_prompt(speaker, style)
                emb = style_from_prompt(
                    bundle, prompt, generator, sampling=sampling, temperature=temperature
                )
            vectors.append(emb.numpy())
    return np.stack(vectors)


def analyze_embeddings(
    bundle: ModelBundle,
    examples: Sequence[TrainingExample],
    mode: str = "reference",
    projection: str = "pca",
    seed: int = 0,
    use_speaker_prompt: bool = True,
    sampling: str = "sample",
    temperature: float = 1.0,
    templates: Sequence[PromptTemplate] | None = None,
    lexicon: Lexicon | None = None,
) -> EmbeddingReport:
    """Collect per-utterance style embeddings and report their clustering.

    ``mode`` selects the embedding source: the reference encoder over each
    utterance's mel, or the prompt encoder over freshly rendered prompts.
    """
    if mode not in MODES:
        raise AnalysisError(f"mode must be one of {MODES}")
    if projection not in PROJECTIONS:
        raise AnalysisError(f"projection must be one of {PROJECTIONS}")
    speakers = {ex.speaker_id for ex in examples}
    if len(speakers) < 2:
        raise AnalysisError("at least 2 speakers required")
    counts = {s: 0 for s in speakers}
    for ex in examples:
        counts[ex.speaker_id] += 1
    thin = sorted(s for s, c in counts.items() if c < 2)
    if thin:
        raise AnalysisError(f"speaker(s) with fewer than 2 utterances: {thin}")

    embeddings = _collect_embeddings(
        bundle, examples, mode, seed, use_speaker_prompt, sampling, temperature,
        templates, lexicon,
    )
    speaker_ids = [ex.speaker_id for ex in examples]
    score = separation_score(embeddings, speaker_ids)
    coords = (
        project_pca(embeddings)
        if projection == "pca"
        else project_tsne(embeddings, seed)
    )
    source = "reference" if mode == "reference" else "prompt-sampled"
    rows = [
        EmbeddingRow(
            utterance_id=ex.utterance_id,
            speaker_id=ex.speaker_id,
            source=source,
            x=float(coords[i, 0]),
            y=float(coords[i, 1]),
        )
        for i, ex in enumerate(examples)
    ]
    return EmbeddingReport(
        rows=rows,
        separation=score,
        mode=mode,
        projection=projection,
        seed=seed,
        embeddings=embeddings,
    )
