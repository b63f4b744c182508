"""Character pseudo-phone frontend.

The pipeline treats phone symbols as opaque; corpora prepared with a real
forced aligner supply their own phone set.  For synthesis from raw text
(and for the bundled synthetic corpus) this frontend lowercases the text
and emits one symbol per letter, with ``sp`` at word boundaries.
"""

from __future__ import annotations

SILENCE_PHONE = "sp"
VOWELS = frozenset("aeiou")


class FrontendError(ValueError):
    pass


def text_to_phonemes(text: str) -> list[str]:
    """Lowercased letters as pseudo-phones; runs of whitespace become 'sp'."""
    phones: list[str] = []
    for ch in text.lower():
        if ch.isspace():
            if phones and phones[-1] != SILENCE_PHONE:
                phones.append(SILENCE_PHONE)
        elif ch.isalpha() or ch == "'":
            phones.append(ch)
        # digits and punctuation are dropped
    while phones and phones[-1] == SILENCE_PHONE:
        phones.pop()
    if not phones:
        raise FrontendError(f"no speakable characters in {text!r}")
    return phones
