"""Generators of valid extraction batches (hypothesis and seeded-random)."""

from __future__ import annotations

import random
import re

from hypothesis import strategies as st

from kgrag.extraction_format import ExtractionBatch, RawEntityRecord, RawRelationRecord

# Text the grammar can carry: one line, no surrounding blanks, and no quote
# followed by blanks and a pipe (that sequence closes a quoted field).
_LINE_BREAKS = "\n\r\x0b\x0c\x1c\x1d\x1e\x85\u2028\u2029"
_CLOSER = re.compile(r'"[ \t]*\|')


def representable(value: str) -> bool:
    return value == value.strip() and not any(c in value for c in _LINE_BREAKS) and not _CLOSER.search(value)


_chars = st.characters(blacklist_categories=("Cs",), blacklist_characters=_LINE_BREAKS)
field_text = st.text(_chars, max_size=24).map(str.strip).filter(representable)
nonempty_text = field_text.filter(bool)


@st.composite
def batches(draw, max_entities: int = 6, max_relations: int = 6) -> ExtractionBatch:
    n = draw(st.integers(0, max_entities))
    entities = [
        RawEntityRecord(f"E{i}", draw(field_text), draw(nonempty_text), draw(field_text)) for i in range(1, n + 1)
    ]
    relations = []
    if n:
        for _ in range(draw(st.integers(0, max_relations))):
            relations.append(
                RawRelationRecord(
                    f"E{draw(st.integers(1, n))}", draw(nonempty_text), f"E{draw(st.integers(1, n))}", draw(field_text)
                )
            )
    return ExtractionBatch(entities, relations)


_ALPHABET = (
    list("abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789")
    + list("|\"[]{}<>'.,;:-_!?") + ["é", "ß", "中", "文", "😀", "\t"]
)


def _random_text(rng: random.Random, nonempty: bool) -> str:
    while True:
        s = "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(0, 20))).strip()
        if representable(s) and (s or not nonempty):
            return s


def random_batch(rng: random.Random) -> ExtractionBatch:
    n = rng.randint(0, 8)
    entities = [
        RawEntityRecord(f"E{i}", _random_text(rng, False), _random_text(rng, True), _random_text(rng, False))
        for i in range(1, n + 1)
    ]
    relations = [
        RawRelationRecord(
            f"E{rng.randint(1, n)}", _random_text(rng, True), f"E{rng.randint(1, n)}", _random_text(rng, False)
        )
        for _ in range(rng.randint(0, 8) if n else 0)
    ]
    return ExtractionBatch(entities, relations)
