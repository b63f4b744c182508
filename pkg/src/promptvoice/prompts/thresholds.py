"""Three-level binning of style statistics, fitted per gender.

Cut points sit at the empirical 33.3rd and 66.7th percentiles (linear
interpolation) of the training utterances of each gender.  Level rule:
value < low_cut maps to the low level, value >= high_cut to the high level,
everything between to normal.  A constant attribute yields degenerate cuts;
they are widened by one ULP on each side so every value lands on normal,
and the table records the attribute as degenerate.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from promptvoice.features.stats import StyleStats

logger = logging.getLogger(__name__)

ATTRIBUTES = ("pitch", "speed", "loudness")

_LEVEL_NAMES = {
    "pitch": ("low", "normal", "high"),
    "speed": ("slow", "normal", "fast"),
    "loudness": ("low", "normal", "high"),
}

_MIN_PER_GENDER = 3


@dataclass(frozen=True)
class StyleLevels:
    pitch: str
    speed: str
    loudness: str

    def __post_init__(self):
        for attr in ATTRIBUTES:
            if getattr(self, attr) not in _LEVEL_NAMES[attr]:
                raise ValueError(f"invalid {attr} level {getattr(self, attr)!r}")

    def to_dict(self) -> dict:
        return {"pitch": self.pitch, "speed": self.speed, "loudness": self.loudness}

    @classmethod
    def from_dict(cls, obj: dict) -> "StyleLevels":
        return cls(pitch=obj["pitch"], speed=obj["speed"], loudness=obj["loudness"])


@dataclass(frozen=True)
class ThresholdTable:
    # cuts[gender][attribute] = (low_cut, high_cut)
    cuts: dict[str, dict[str, tuple[float, float]]]
    degenerate: frozenset[tuple[str, str]] = frozenset()

    def save(self, path: str | Path) -> None:
        obj = {
            "cuts": {g: {a: list(c) for a, c in attrs.items()} for g, attrs in self.cuts.items()},
            "degenerate": sorted(list(pair) for pair in self.degenerate),
        }
        Path(path).write_text(json.dumps(obj, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdTable":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        cuts = {
            g: {a: (float(c[0]), float(c[1])) for a, c in attrs.items()}
            for g, attrs in obj["cuts"].items()
        }
        return cls(cuts=cuts, degenerate=frozenset((g, a) for g, a in obj["degenerate"]))


def _attribute_value(stats: StyleStats, attribute: str) -> float:
    if attribute == "pitch":
        return stats.mean_f0_hz
    if attribute == "speed":
        return stats.speaking_rate
    if attribute == "loudness":
        return stats.loudness_db
    raise KeyError(attribute)


def compute_thresholds(stats: Sequence[tuple[StyleStats, str]]) -> ThresholdTable:
    """Fit per-gender cut points from (StyleStats, gender) pairs.

    Fully unvoiced utterances (NaN mean F0) are excluded from the pitch
    statistics but still count toward speed and loudness.
    """
    by_gender: dict[str, list[StyleStats]] = {}
    for s, gender in stats:
        by_gender.setdefault(gender, []).append(s)

    cuts: dict[str, dict[str, tuple[float, float]]] = {}
    degenerate: set[tuple[str, str]] = set()
    for gender, items in sorted(by_gender.items()):
        if len(items) < _MIN_PER_GENDER:
            raise ValueError(
                f"need at least {_MIN_PER_GENDER} utterances for gender {gender!r}, got {len(items)}"
            )
        cuts[gender] = {}
        for attribute in ATTRIBUTES:
            values = np.array(
                [
                    _attribute_value(s, attribute)
                    for s in items
                    if not math.isnan(_attribute_value(s, attribute))
                ]
            )
            if values.size < _MIN_PER_GENDER:
                raise ValueError(
                    f"not enough valid {attribute} values for gender {gender!r}"
                )
            low = float(np.percentile(values, 100.0 / 3.0))
            high = float(np.percentile(values, 200.0 / 3.0))
            if not low < high:
                logger.warning(
                    "degenerate %s distribution for gender %s; all utterances map to normal",
                    attribute,
                    gender,
                )
                degenerate.add((gender, attribute))
                low = math.nextafter(low, -math.inf)
                high = math.nextafter(high, math.inf)
            cuts[gender][attribute] = (low, high)
    return ThresholdTable(cuts=cuts, degenerate=frozenset(degenerate))


def assign_levels(stats: StyleStats, gender: str, table: ThresholdTable) -> StyleLevels:
    """Map statistics onto three-level labels using the fitted cuts.

    NaN mean F0 (fully unvoiced utterance) maps pitch to normal.
    """
    if gender not in table.cuts:
        raise KeyError(f"no thresholds fitted for gender {gender!r}")
    levels = {}
    for attribute in ATTRIBUTES:
        value = _attribute_value(stats, attribute)
        low_cut, high_cut = table.cuts[gender][attribute]
        names = _LEVEL_NAMES[attribute]
        if math.isnan(value):
            levels[attribute] = names[1]
        elif value < low_cut:
            levels[attribute] = names[0]
        elif value >= high_cut:
            levels[attribute] = names[2]
        else:
            levels[attribute] = names[1]
    return StyleLevels(**levels)


def assign_all(
    stats: Iterable[tuple[str, StyleStats, str]], table: ThresholdTable
) -> dict[str, StyleLevels]:
    """Convenience: (utterance_id, stats, gender) triples to per-utterance levels."""
    return {uid: assign_levels(s, gender, table) for uid, s, gender in stats}
