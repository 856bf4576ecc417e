"""Parser, validator and serializer for the bracketed extraction grammar.

Records look like::

    [entity | E1 | Person | "Marie Curie" | Physicist and chemist]
    [relation | E1 | shared Nobel Prize with | E2 | "shared the 1903 Nobel Prize in Physics with Pierre Curie"]

Any other line is prose and is skipped. See ``docs/extraction-grammar.md``
for the full wire contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Literal

EID_RE = re.compile(r"E[1-9][0-9]*")
_RECORD_START_RE = re.compile(r"^[\s>*\-+#`\d.)]*\[\s*(entity|relation)\s*\|", re.IGNORECASE)

Mode = Literal["strict", "lenient"]


@dataclass(frozen=True)
class RawEntityRecord:
    eid: str
    entity_type: str
    name: str
    description: str


@dataclass(frozen=True)
class RawRelationRecord:
    source_eid: str
    predicate: str
    target_eid: str
    evidence: str


@dataclass(frozen=True)
class FormatViolation:
    """Base class of the per-record problems reported by the parser."""


@dataclass(frozen=True)
class MalformedRecord(FormatViolation):
    line_no: int
    line: str
    cause: str


@dataclass(frozen=True)
class UnregisteredEID(FormatViolation):
    relation: RawRelationRecord
    eid: str


@dataclass(frozen=True)
class DuplicateEID(FormatViolation):
    eid: str


@dataclass(frozen=True)
class BrokenSequence(FormatViolation):
    expected: str
    found: str


@dataclass
class ExtractionBatch:
    entities: list[RawEntityRecord] = field(default_factory=list)
    relations: list[RawRelationRecord] = field(default_factory=list)
    source_chunk: str | None = None
    errors: list[FormatViolation] = field(default_factory=list)
    skipped_lines: int = 0

    def same_records(self, other: ExtractionBatch) -> bool:
        return self.entities == other.entities and self.relations == other.relations


class InvalidBatch(ValueError):
    def __init__(self, errors: list[FormatViolation]):
        super().__init__(f"{len(errors)} extraction format violation(s): {errors[:3]}")
        self.errors = errors


def split_fields(body: str) -> list[str]:
    """Split a record body on ``|``, ignoring pipes inside quoted fields.

    A field is quoted when its first non-blank character is ``"``. The quote
    closes at a ``"`` followed only by blanks and then ``|`` or the end of the
    body, so inner quotes need no escaping.
    """
    fields = []
    i, n = 0, len(body)
    while True:
        j = i
        while j < n and body[j] in " \t":
            j += 1
        if j < n and body[j] == '"':
            k = j + 1
            close = -1
            while k < n:
                if body[k] == '"':
                    rest = k + 1
                    while rest < n and body[rest] in " \t":
                        rest += 1
                    if rest == n or body[rest] == "|":
                        close = rest
                        break
                k += 1
            if close >= 0:
                fields.append(body[i:close])
                if close == n:
                    return fields
                i = close + 1
                continue
        bar = body.find("|", i)
        if bar < 0:
            fields.append(body[i:])
            return fields
        fields.append(body[i:bar])
        i = bar + 1


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
        return value[1:-1].strip()
    return value


def _parse_record(line: str) -> RawEntityRecord | RawRelationRecord:
    open_at = line.index("[")
    close_at = line.rfind("]")
    if close_at <= open_at:
        raise ValueError("missing closing bracket")
    fields = split_fields(line[open_at + 1 : close_at])
    kind = fields[0].strip().lower()
    if len(fields) != 5:
        raise ValueError(f"{kind} record needs 5 fields, got {len(fields)}")
    if kind == "entity":
        eid, etype, name, desc = (f.strip() for f in fields[1:])
        if not EID_RE.fullmatch(eid):
            raise ValueError(f"bad EID {eid!r}")
        name = _unquote(name)
        if not name:
            raise ValueError("empty entity name")
        return RawEntityRecord(eid, _unquote(etype), name, _unquote(desc))
    src, pred, tgt, evidence = (f.strip() for f in fields[1:])
    for eid in (src, tgt):
        if not EID_RE.fullmatch(eid):
            raise ValueError(f"bad EID {eid!r}")
    pred = _unquote(pred)
    if not pred:
        raise ValueError("empty predicate")
    return RawRelationRecord(src, pred, tgt, _unquote(evidence))


def parse_extraction(text: str | bytes, chunk_ref: str | None = None, mode: Mode = "lenient") -> ExtractionBatch:
    """Parse raw model output into a validated batch.

    Lenient mode (the default) keeps every well-formed record that survives
    :func:`validate_batch`, recording problems in ``batch.errors``. Strict mode
    raises :class:`InvalidBatch` if anything at all is wrong.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    batch = ExtractionBatch(source_chunk=chunk_ref)
    malformed: list[FormatViolation] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not _RECORD_START_RE.match(line):
            if line.strip():
                batch.skipped_lines += 1
            continue
        try:
            record = _parse_record(line)
        except ValueError as exc:
            malformed.append(MalformedRecord(line_no, line, str(exc)))
            continue
        if isinstance(record, RawEntityRecord):
            batch.entities.append(record)
        else:
            batch.relations.append(record)
    if mode == "strict" and malformed:
        raise InvalidBatch(malformed + validate_batch(batch, "lenient")[1])
    batch, errors = validate_batch(batch, mode)
    batch.errors = malformed + errors
    return batch


def _violations(batch: ExtractionBatch) -> tuple[list[FormatViolation], set[int], set[int]]:
    errors: list[FormatViolation] = []
    dup_entities: set[int] = set()
    bad_relations: set[int] = set()

    seen: set[str] = set()
    for idx, ent in enumerate(batch.entities):
        if ent.eid in seen:
            errors.append(DuplicateEID(ent.eid))
            dup_entities.add(idx)
        seen.add(ent.eid)

    expected = 1
    for idx, ent in enumerate(batch.entities):
        if idx in dup_entities:
            continue
        number = int(ent.eid[1:])
        if number != expected:
            errors.append(BrokenSequence(f"E{expected}", ent.eid))
        expected = number + 1

    for idx, rel in enumerate(batch.relations):
        for eid in dict.fromkeys((rel.source_eid, rel.target_eid)):
            if eid not in seen:
                errors.append(UnregisteredEID(rel, eid))
                bad_relations.add(idx)
    return errors, dup_entities, bad_relations


def validate_batch(batch: ExtractionBatch, mode: Mode = "lenient") -> tuple[ExtractionBatch, list[FormatViolation]]:
    """Check EID uniqueness, EID sequence and relation references.

    Strict mode returns ``(batch, [])`` or raises :class:`InvalidBatch`.
    Lenient mode drops relations with unregistered endpoints and repeated
    declarations of an already-declared EID; EIDs are never renumbered.
    """
    errors, dup_entities, bad_relations = _violations(batch)
    if mode == "strict":
        if errors:
            raise InvalidBatch(errors)
        return batch, []
    cleaned = replace(
        batch,
        entities=[e for i, e in enumerate(batch.entities) if i not in dup_entities],
        relations=[r for i, r in enumerate(batch.relations) if i not in bad_relations],
        errors=list(batch.errors),
    )
    return cleaned, errors


def _quote(value: str) -> str:
    return f'"{value}"'


def _plain(value: str) -> str:
    # Unquoted fields may not contain "|" or look quoted; fall back to quoting.
    if "|" in value or value.startswith('"') or value != value.strip():
        return _quote(value)
    return value


def serialize_batch(batch: ExtractionBatch) -> str:
    lines = [
        f"[entity | {e.eid} | {_plain(e.entity_type)} | {_quote(e.name)} | {_plain(e.description)}]"
        for e in batch.entities
    ]
    lines += [
        f"[relation | {r.source_eid} | {_plain(r.predicate)} | {r.target_eid} | {_quote(r.evidence)}]"
        for r in batch.relations
    ]
    return "\n".join(lines)
