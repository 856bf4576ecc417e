"""Mutable knowledge graph with provenance, name-based entity merging and
edit-distance relation deduplication.

Persistence is JSON Lines: a header record, then one record per entity and
per relation, in insertion order, so equal graphs serialize byte-identically.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal

from kgrag.extraction_format import ExtractionBatch, RawEntityRecord

SCHEMA_VERSION = 1
DEFAULT_DEDUP_THRESHOLD = 0.2


class DanglingEndpoint(KeyError):
    pass


class GraphFormatError(ValueError):
    pass


def normalize_name(name: str) -> str:
    return " ".join(name.casefold().split())


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    """Levenshtein distance divided by the longer length; 0.0 for two empty strings."""
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


@dataclass
class Entity:
    entity_id: str
    name: str
    entity_type: str
    description: str
    sources: set[str]
    created_round: int = 0


@dataclass
class Relation:
    relation_id: str
    head: str
    predicate: str
    tail: str
    evidence: str
    sources: set[str]
    created_round: int = 0


@dataclass(frozen=True)
class GraphStats:
    round: int
    nodes: int
    edges: int


@dataclass
class KnowledgeGraph:
    entities: dict[str, Entity] = field(default_factory=dict)
    relations: dict[str, Relation] = field(default_factory=dict)
    name_index: dict[str, str] = field(default_factory=dict)
    round: int = 0
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD
    _pairs: dict[tuple[str, str], list[str]] = field(default_factory=dict, repr=False)
    _incident: dict[str, list[str]] = field(default_factory=dict, repr=False)
    _next_entity: int = field(default=1, repr=False)
    _next_relation: int = field(default=1, repr=False)

    # -- reads -----------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.entities)

    @property
    def edge_count(self) -> int:
        return len(self.relations)

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise DanglingEndpoint(entity_id) from None

    def find_entity(self, name: str) -> Entity | None:
        eid = self.name_index.get(normalize_name(name))
        return self.entities[eid] if eid else None

    def incident_relations(self, entity_id: str) -> list[Relation]:
        return [self.relations[rid] for rid in self._incident.get(entity_id, ())]

    def relations_between(self, head: str, tail: str) -> list[Relation]:
        return [self.relations[rid] for rid in self._pairs.get((head, tail), ())]

    def find_relation(self, head: str, predicate: str, tail: str) -> Relation | None:
        for rel in self.relations_between(head, tail):
            if rel.predicate == predicate:
                return rel
        return None

    def sources_of_pair(self, head: str, tail: str) -> set[str]:
        return self.entity(head).sources | self.entity(tail).sources

    def relation_key(self, head: str, predicate: str, tail: str) -> str:
        return f"{self.entity(head).name}|{predicate}|{self.entity(tail).name}"

    def snapshot_stats(self) -> GraphStats:
        return GraphStats(self.round, self.node_count, self.edge_count)

    def copy(self) -> KnowledgeGraph:
        return copy.deepcopy(self)

    def check_integrity(self) -> list[str]:
        """Relation ids whose endpoints do not resolve (full scan)."""
        return [r.relation_id for r in self.relations.values() if r.head not in self.entities or r.tail not in self.entities]

    # -- writes ----------------------------------------------------------

    def upsert_entity(self, rec: RawEntityRecord, chunk: str | Iterable[str]) -> str:
        """Insert or merge by normalized name; returns the (stable) entity id."""
        sources = {chunk} if isinstance(chunk, str) else set(chunk)
        key = normalize_name(rec.name)
        existing_id = self.name_index.get(key)
        if existing_id is not None:
            ent = self.entities[existing_id]
            ent.sources |= sources
            if len(rec.description) > len(ent.description):
                ent.description = rec.description
            if not ent.entity_type:
                ent.entity_type = rec.entity_type
            return existing_id
        entity_id = f"e{self._next_entity}"
        self._next_entity += 1
        self.entities[entity_id] = Entity(entity_id, rec.name, rec.entity_type, rec.description, sources, self.round)
        self.name_index[key] = entity_id
        return entity_id

    def add_relation(
        self,
        head: str,
        predicate: str,
        tail: str,
        evidence: str,
        chunk: str | Iterable[str],
        threshold: float | None = None,
    ) -> Literal["added", "merged"]:
        """Add a relation unless a near-duplicate joins the same ordered entity pair.

        Near-duplicate means the normalized edit distance between the keys
        ``"head_name|predicate|tail_name"`` is at most ``threshold``.
        """
        threshold = self.dedup_threshold if threshold is None else threshold
        if not 0 <= threshold <= 1:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        sources = {chunk} if isinstance(chunk, str) else set(chunk)
        key = self.relation_key(head, predicate, tail)
        best: Relation | None = None
        best_dist = 2.0
        for rel in self.relations_between(head, tail):
            d = normalized_edit_distance(key, self.relation_key(rel.head, rel.predicate, rel.tail))
            if d < best_dist:
                best, best_dist = rel, d
        if best is not None and best_dist <= threshold:
            best.sources |= sources
            return "merged"
        relation_id = f"r{self._next_relation}"
        self._next_relation += 1
        self.relations[relation_id] = Relation(relation_id, head, predicate, tail, evidence, sources, self.round)
        self._index_relation(self.relations[relation_id])
        return "added"

    def _index_relation(self, rel: Relation) -> None:
        self._pairs.setdefault((rel.head, rel.tail), []).append(rel.relation_id)
        self._incident.setdefault(rel.head, []).append(rel.relation_id)
        if rel.tail != rel.head:
            self._incident.setdefault(rel.tail, []).append(rel.relation_id)

    def merge_extraction(
        self,
        batch: ExtractionBatch,
        sources: Iterable[str] | None = None,
        threshold: float | None = None,
    ) -> tuple[int, int]:
        """Upsert a batch's entities, then its relations; returns net (entities, relations) added.

        Provenance defaults to ``batch.source_chunk``. Relations whose EIDs are
        not declared in the batch are skipped.
        """
        if sources is None:
            if batch.source_chunk is None:
                raise ValueError("batch has no source_chunk and no sources were given")
            sources = {batch.source_chunk}
        sources = set(sources)
        nodes_before = self.node_count
        local: dict[str, str] = {}
        for rec in batch.entities:
            local.setdefault(rec.eid, self.upsert_entity(rec, sources))
        added_relations = 0
        for rel in batch.relations:
            head, tail = local.get(rel.source_eid), local.get(rel.target_eid)
            if head is None or tail is None:
                continue
            if self.add_relation(head, rel.predicate, tail, rel.evidence, sources, threshold) == "added":
                added_relations += 1
        return self.node_count - nodes_before, added_relations

    # -- persistence -----------------------------------------------------

    def iter_records(self) -> Iterator[dict]:
        yield {
            "kind": "header",
            "schema": SCHEMA_VERSION,
            "round": self.round,
            "entities": len(self.entities),
            "relations": len(self.relations),
            "dedup_threshold": self.dedup_threshold,
        }
        for e in self.entities.values():
            yield {
                "kind": "entity",
                "id": e.entity_id,
                "name": e.name,
                "type": e.entity_type,
                "description": e.description,
                "sources": sorted(e.sources),
                "round": e.created_round,
            }
        for r in self.relations.values():
            yield {
                "kind": "relation",
                "id": r.relation_id,
                "head": r.head,
                "predicate": r.predicate,
                "tail": r.tail,
                "evidence": r.evidence,
                "sources": sorted(r.sources),
                "round": r.created_round,
            }

    def persist(self) -> bytes:
        lines = (json.dumps(rec, ensure_ascii=False, sort_keys=True) for rec in self.iter_records())
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def load(cls, data: bytes | str) -> KnowledgeGraph:
        if isinstance(data, bytes):
            try:
                data = data.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise GraphFormatError("graph file is not UTF-8") from exc
        lines = [ln for ln in data.splitlines() if ln.strip()]
        if not lines:
            raise GraphFormatError("empty graph file (missing header)")
        try:
            records = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"corrupt graph record: {exc}") from exc
        header = records[0]
        if not isinstance(header, dict) or header.get("kind") != "header":
            raise GraphFormatError("first record must be the header")
        if header.get("schema") != SCHEMA_VERSION:
            raise GraphFormatError(f"unsupported schema {header.get('schema')!r}")
        g = cls(round=int(header["round"]), dedup_threshold=float(header.get("dedup_threshold", DEFAULT_DEDUP_THRESHOLD)))
        try:
            for rec in records[1:]:
                if rec["kind"] == "entity":
                    ent = Entity(rec["id"], rec["name"], rec["type"], rec["description"], set(rec["sources"]), int(rec["round"]))
                    g.entities[ent.entity_id] = ent
                    g.name_index[normalize_name(ent.name)] = ent.entity_id
                elif rec["kind"] == "relation":
                    rel = Relation(rec["id"], rec["head"], rec["predicate"], rec["tail"], rec["evidence"], set(rec["sources"]), int(rec["round"]))
                    g.relations[rel.relation_id] = rel
                    g._index_relation(rel)
                else:
                    raise GraphFormatError(f"unknown record kind {rec['kind']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"malformed graph record: {exc!r}") from exc
        if len(g.entities) != header["entities"] or len(g.relations) != header["relations"]:
            raise GraphFormatError(
                f"header declares {header['entities']} entities / {header['relations']} relations, "
                f"found {len(g.entities)} / {len(g.relations)} (truncated file?)"
            )
        if g.check_integrity():
            raise GraphFormatError("relation endpoints do not resolve")
        g._next_entity = 1 + max((int(k[1:]) for k in g.entities if k[1:].isdigit()), default=0)
        g._next_relation = 1 + max((int(k[1:]) for k in g.relations if k[1:].isdigit()), default=0)
        return g


def persist(g: KnowledgeGraph) -> bytes:
    return g.persist()


def load(data: bytes | str) -> KnowledgeGraph:
    return KnowledgeGraph.load(data)
