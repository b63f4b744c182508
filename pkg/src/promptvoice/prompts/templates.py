"""Style prompt templates, rendering, and the inverse parser.

The bundled corpus holds 32 templates over four slots (gender word plus the
three level slots) and a synonym lexicon per slot; the combinatorial
expansion exceeds 12,000 distinct surface sentences.  Rendering samples a
template and one synonym per slot from a caller-owned RNG.  Parsing matches
a rendered sentence against the template set (each template compiles to a
regex whose groups are constrained to the slot vocabularies), recovering
gender and the three levels exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from random import Random
from typing import Mapping, Sequence

from promptvoice.prompts.thresholds import StyleLevels

SLOT_NAMES = ("gender_word", "pitch_level", "speed_level", "loudness_level")

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")
_SLOT_TO_ATTRIBUTE = {
    "pitch_level": "pitch",
    "speed_level": "speed",
    "loudness_level": "loudness",
}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str

    def slots(self) -> list[str]:
        """Slot names in order of appearance."""
        found = _SLOT_RE.findall(self.text)
        unknown = set(found) - set(SLOT_NAMES)
        if unknown:
            raise TemplateError(f"{self.template_id}: unknown slot(s) {sorted(unknown)}")
        return found


Lexicon = Mapping[str, Mapping[str, Sequence[str]]]


def _data_text(name: str) -> str:
    return resources.files("promptvoice.prompts").joinpath("data", name).read_text("utf-8")


def default_templates() -> list[PromptTemplate]:
    items = json.loads(_data_text("templates.json"))
    return [PromptTemplate(template_id=i["template_id"], text=i["text"]) for i in items]


def default_lexicon() -> Lexicon:
    return json.loads(_data_text("lexicon.json"))


def load_templates(path: str | Path) -> list[PromptTemplate]:
    items = json.loads(Path(path).read_text(encoding="utf-8"))
    templates = [PromptTemplate(template_id=i["template_id"], text=i["text"]) for i in items]
    if not templates:
        raise TemplateError(f"{path}: empty template file")
    for t in templates:
        t.slots()
    return templates


def load_lexicon(path: str | Path) -> Lexicon:
    lex = json.loads(Path(path).read_text(encoding="utf-8"))
    missing = set(SLOT_NAMES) - set(lex)
    if missing:
        raise TemplateError(f"{path}: lexicon missing slot(s) {sorted(missing)}")
    return lex


def _slot_key(slot: str, levels: StyleLevels, gender: str) -> str:
    if slot == "gender_word":
        return gender
    return getattr(levels, _SLOT_TO_ATTRIBUTE[slot])


def render_style_prompt(
    levels: StyleLevels,
    gender: str,
    templates: Sequence[PromptTemplate],
    rng: Random,
    lexicon: Lexicon | None = None,
) -> str:
    """Render one style prompt, sampling a template and per-slot synonyms."""
    if not templates:
        raise TemplateError("no templates available")
    lexicon = lexicon or default_lexicon()
    template = templates[0] if len(templates) == 1 else rng.choice(templates)
    text = template.text
    for slot in template.slots():
        key = _slot_key(slot, levels, gender)
        try:
            words = lexicon[slot][key]
        except KeyError:
            raise TemplateError(f"lexicon has no entry for {slot}/{key}") from None
        word = words[0] if len(words) == 1 else rng.choice(list(words))
        text = text.replace("{" + slot + "}", word, 1)
    return text


def compose_prompt(speaker_prompt: str | None, style_prompt: str) -> str:
    """Join the per-utterance style prompt with the per-speaker prompt.

    Records without a speaker prompt use the style prompt alone.
    """
    if not style_prompt or not style_prompt.strip():
        raise ValueError("style prompt must be non-empty")
    if speaker_prompt is None or not speaker_prompt.strip():
        return style_prompt
    return f"{style_prompt} {speaker_prompt}"


def _template_pattern(template: PromptTemplate, lexicon: Lexicon) -> re.Pattern:
    parts = []
    last = 0
    for i, match in enumerate(_SLOT_RE.finditer(template.text)):
        parts.append(re.escape(template.text[last : match.start()]))
        slot = match.group(1)
        words: list[str] = []
        for level_words in lexicon[slot].values():
            words.extend(level_words)
        alternation = "|".join(re.escape(w) for w in sorted(set(words), key=len, reverse=True))
        parts.append(f"(?P<g{i}_{slot}>{alternation})")
        last = match.end()
    parts.append(re.escape(template.text[last:]))
    return re.compile("".join(parts) + r"\Z")


def _inverse_lexicon(lexicon: Lexicon) -> dict[str, dict[str, str]]:
    inverse: dict[str, dict[str, str]] = {}
    for slot, by_level in lexicon.items():
        inverse[slot] = {}
        for level, words in by_level.items():
            for word in words:
                inverse[slot][word] = level
    return inverse


def parse_style_prompt(
    text: str,
    templates: Sequence[PromptTemplate],
    lexicon: Lexicon | None = None,
) -> tuple[StyleLevels, str]:
    """Invert a rendered style prompt back to (StyleLevels, gender).

    Raises TemplateError when the text matches no template or the matches
    disagree on the recovered labels.
    """
    lexicon = lexicon or default_lexicon()
    inverse = _inverse_lexicon(lexicon)
    results = set()
    for template in templates:
        match = _template_pattern(template, lexicon).match(text)
        if match is None:
            continue
        values: dict[str, str] = {}
        for group_name, word in match.groupdict().items():
            slot = group_name.split("_", 1)[1]
            values[slot] = inverse[slot][word]
        results.add(
            (
                values["pitch_level"],
                values["speed_level"],
                values["loudness_level"],
                values["gender_word"],
            )
        )
    if not results:
        raise TemplateError(f"prompt does not match any template: {text!r}")
    if len(results) > 1:
        raise TemplateError(f"ambiguous prompt, matches {len(results)} label sets: {text!r}")
    pitch, speed, loudness, gender = next(iter(results))
    return StyleLevels(pitch=pitch, speed=speed, loudness=loudness), gender


def count_surface_forms(
    templates: Sequence[PromptTemplate], lexicon: Lexicon | None = None
) -> int:
    """Number of distinct rendered sentences over all labels and synonyms."""
    lexicon = lexicon or default_lexicon()
    total = 0
    for template in templates:
        combos = 1
        for slot in template.slots():
            combos *= sum(len(words) for words in lexicon[slot].values())
        total += combos
    return total
