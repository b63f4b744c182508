"""Phoneme symbol table."""

from __future__ import annotations

from typing import Iterable, Sequence

import torch

PAD_ID = 0


class PhonemeVocabulary:
    """Maps phone symbols to ids; id 0 is reserved for padding."""

    def __init__(self, symbols: Iterable[str]):
        uniq = sorted(set(symbols))
        if not uniq:
            raise ValueError("empty phoneme vocabulary")
        self._id_by_symbol = {s: i + 1 for i, s in enumerate(uniq)}
        self._symbols = uniq

    def __len__(self) -> int:
        return len(self._symbols) + 1  # + padding

    @property
    def symbols(self) -> list[str]:
        return list(self._symbols)

    def encode(self, phonemes: Sequence[str]) -> torch.Tensor:
        ids = []
        for p in phonemes:
            if p not in self._id_by_symbol:
                raise KeyError(f"unknown phoneme symbol {p!r}")
            ids.append(self._id_by_symbol[p])
        return torch.tensor(ids, dtype=torch.long)

    def to_dict(self) -> dict:
        return {"symbols": self._symbols}

    @classmethod
    def from_dict(cls, obj: dict) -> "PhonemeVocabulary":
        return cls(obj["symbols"])
