"""Subgraph retrieval by scored beam search, and dense chunk retrieval."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from kgrag.corpus import Corpus
from kgrag.kg_store import KnowledgeGraph, Relation
from kgrag.llm.gateway import Gateway
from kgrag.llm.transport import GatewayError

log = logging.getLogger(__name__)

DEFAULT_BEAM_WIDTH = 3
DEFAULT_MAX_DEPTH = 3
DEFAULT_SEED_K = 3


class ZeroVector(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return max(-1.0, min(1.0, float(np.dot(u, v)) / (nu * nv)))


@dataclass(frozen=True)
class PathElement:
    head: str
    predicate: str
    tail: str


@dataclass(frozen=True)
class ScoredPath:
    seed: str
    relation_ids: tuple[str, ...]
    elements: tuple[PathElement, ...]
    score: float


@dataclass
class Subgraph:
    paths: list[ScoredPath] = field(default_factory=list)
    score: float = 0.0

    def elements(self) -> list[PathElement]:
        """Unique elements across paths, in path order."""
        return list(dict.fromkeys(el for p in self.paths for el in p.elements))


@dataclass(frozen=True)
class RankedChunk:
    chunk_id: str
    similarity: float


def verbalize_path(g: KnowledgeGraph, relations: Sequence[Relation]) -> str:
    return ". ".join(f"{g.entity(r.head).name} {r.predicate} {g.entity(r.tail).name}" for r in relations)


class PathScorer(Protocol):
    def score(self, g: KnowledgeGraph, query: str, paths: list[list[Relation]]) -> list[float]: ...


class EmbeddingScorer:
    """Cosine between the query and the verbalized path."""

    def __init__(self, gateway: Gateway):
        self.gateway = gateway

    def score(self, g: KnowledgeGraph, query: str, paths: list[list[Relation]]) -> list[float]:
        if not paths:
            return []
        q = self.gateway.embed([query])[0]
        vecs = self.gateway.embed([verbalize_path(g, p) for p in paths])
        return [cosine(q, v) for v in vecs]


_SCORE_LINE = re.compile(r"^\s*(\d+)\s*[:.)\-]\s*([0-9]*\.?[0-9]+)")


class LLMScorer:
    """Asks the chat model to rate candidate paths; unrated paths score 0.

    Falls back to ``fallback`` scores when the model call fails.
    """

    def __init__(self, gateway: Gateway, fallback: PathScorer | None = None):
        self.gateway = gateway
        self.fallback = fallback or EmbeddingScorer(gateway)

    def score(self, g: KnowledgeGraph, query: str, paths: list[list[Relation]]) -> list[float]:
        if not paths:
            return []
        listing = "\n".join(f"{i}. {verbalize_path(g, p)}" for i, p in enumerate(paths, start=1))
        prompt = self.gateway.render("path_pruning", question=query, paths=listing)
        try:
            raw = self.gateway.complete(prompt)
        except GatewayError as exc:
            log.warning("path pruning call failed, using fallback scorer: %s", exc)
            return self.fallback.score(g, query, paths)
        scores = [0.0] * len(paths)
        for line in raw.splitlines():
            m = _SCORE_LINE.match(line)
            if m and 1 <= int(m.group(1)) <= len(paths):
                scores[int(m.group(1)) - 1] = float(m.group(2))
        return scores


def seed_entities(g: KnowledgeGraph, query: str, gateway: Gateway, k: int = DEFAULT_SEED_K) -> list[str]:
    """Top-k entities by cosine between the query and ``"name: description"``."""
    if not g.entities or k < 1:
        return []
    ids = list(g.entities)
    texts = [f"{g.entities[i].name}: {g.entities[i].description}" for i in ids]
    q = gateway.embed([query])[0]
    vecs = gateway.embed(texts)
    sims = [cosine(q, v) for v in vecs]
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [ids[i] for i in order[:k]]


@dataclass(frozen=True)
class _Partial:
    seed: str
    frontier: str
    relation_ids: tuple[str, ...]
    score: float


def beam_search_subgraph(
    g: KnowledgeGraph,
    query: str,
    seeds: Sequence[str],
    scorer: PathScorer,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Subgraph:
    """Breadth-limited path expansion from ``seeds``.

    At each depth every beam path is extended by each incident relation of
    its frontier entity (either direction) not already on the path. Paths
    with no possible extension are carried forward unchanged; isolated seeds
    are discarded so they never take a beam slot. Candidates are scored
    against the query and the best ``beam_width`` survive, ties broken by
    (relation-id sequence, seed). Zero-length paths are dropped from the
    result.
    """
    if beam_width < 1 or max_depth < 1:
        raise ValueError("beam_width and max_depth must be >= 1")
    beam = [_Partial(s, s, (), 0.0) for s in dict.fromkeys(seeds) if s in g.entities]
    for _ in range(max_depth):
        carried: list[_Partial] = []
        extensions: list[tuple[str, str, tuple[str, ...]]] = []
        for p in beam:
            nexts = [r for r in g.incident_relations(p.frontier) if r.relation_id not in p.relation_ids]
            if not nexts:
                # a seed with no relations can never become a path; do not let it hold a slot
                if p.relation_ids:
                    carried.append(p)
            for r in nexts:
                other = r.tail if r.head == p.frontier else r.head
                extensions.append((p.seed, other, p.relation_ids + (r.relation_id,)))
        if not extensions:
            break
        scores = scorer.score(g, query, [[g.relations[rid] for rid in ext[2]] for ext in extensions])
        candidates = carried + [_Partial(s, f, rids, sc) for (s, f, rids), sc in zip(extensions, scores)]
        candidates.sort(key=lambda p: (-p.score, p.relation_ids, p.seed))
        beam = candidates[:beam_width]

    paths = []
    for p in beam:
        if not p.relation_ids:
            continue
        rels = [g.relations[rid] for rid in p.relation_ids]
        paths.append(
            ScoredPath(p.seed, p.relation_ids, tuple(PathElement(r.head, r.predicate, r.tail) for r in rels), p.score)
        )
    return Subgraph(paths, max((p.score for p in paths), default=0.0))


def retrieve_subgraph(
    g: KnowledgeGraph,
    query: str,
    gateway: Gateway,
    scorer: PathScorer | None = None,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_depth: int = DEFAULT_MAX_DEPTH,
    seed_k: int = DEFAULT_SEED_K,
) -> Subgraph:
    seeds = seed_entities(g, query, gateway, seed_k)
    return beam_search_subgraph(g, query, seeds, scorer or EmbeddingScorer(gateway), beam_width, max_depth)


def dense_retrieve(query: str, corpus: Corpus, gateway: Gateway, k: int = 5) -> list[RankedChunk]:
    """Top-k chunks by cosine similarity, ties broken by chunk id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    chunks = list(corpus)
    if not chunks:
        return []
    q = gateway.embed([query])[0]
    vecs = gateway.embed([c.text for c in chunks])
    ranked = [RankedChunk(c.chunk_id, cosine(q, v)) for c, v in zip(chunks, vecs)]
    ranked.sort(key=lambda rc: (-rc.similarity, rc.chunk_id))
    return ranked[:k]
