"""Phone alignment ingestion.

Alignment files are tab- or whitespace-separated triples per line::

    <phone> <start_seconds> <end_seconds>

Segments must be ordered and non-overlapping.  Durations are converted to
frame counts at the configured hop so that they sum exactly to
``ceil(total_seconds / hop)``: each phone gets the floor of its exact frame
count, and the leftover frames are handed out one at a time in order of
largest fractional remainder (ties go to the earlier phone).
"""

from __future__ import annotations

import math
from pathlib import Path

_TIME_EPS = 1e-9


class AlignmentError(ValueError):
    """Malformed alignment content."""


def distribute_frames(spans_seconds: list[float], total_frames: int, hop_seconds: float) -> list[int]:
    """Round per-phone durations to frames while preserving the exact total."""
    exact = [span / hop_seconds for span in spans_seconds]
    base = [math.floor(e) for e in exact]
    leftover = total_frames - sum(base)
    if leftover < 0:
        raise AlignmentError(
            f"alignment spans exceed the target frame count ({sum(base)} > {total_frames})"
        )
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - base[i]), i))
    for k in range(leftover):
        base[order[k % len(order)]] += 1
    return base


def load_alignment(
    path: str | Path,
    hop_seconds: float,
    total_seconds: float | None = None,
) -> tuple[list[str], list[int]]:
    """Read an alignment file and return (phones, frame durations).

    ``total_seconds`` defaults to the end of the last segment; pass the true
    audio duration so the frame total matches the mel spectrogram of the
    full waveform.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"alignment not found: {path}")
    phones: list[str] = []
    spans: list[float] = []
    prev_end = 0.0
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise AlignmentError(f"{path.name}:{lineno}: expected 'phone start end', got {line!r}")
        phone, start_s, end_s = parts
        try:
            start = float(start_s)
            end = float(end_s)
        except ValueError:
            raise AlignmentError(f"{path.name}:{lineno}: non-numeric time") from None
        if end < start - _TIME_EPS:
            raise AlignmentError(f"{path.name}:{lineno}: segment ends before it starts")
        if start < prev_end - _TIME_EPS:
            raise AlignmentError(f"{path.name}:{lineno}: segment overlaps or is out of order")
        phones.append(phone)
        spans.append(max(end - start, 0.0))
        prev_end = max(prev_end, end)
    if not phones:
        raise AlignmentError(f"{path}: no segments")
    if total_seconds is None:
        total_seconds = prev_end
    elif total_seconds < prev_end - _TIME_EPS:
        raise AlignmentError(
            f"{path}: alignment runs to {prev_end:.3f}s but audio is {total_seconds:.3f}s"
        )
    total_frames = math.ceil(total_seconds / hop_seconds - _TIME_EPS)
    durations = distribute_frames(spans, total_frames, hop_seconds)
    return phones, durations
