"""Shared builders for tests: scripted gateways, graphs and extraction text."""

from __future__ import annotations

import hashlib
import math
import random
from pathlib import Path

from kgrag.corpus import Corpus, Document
from kgrag.extraction_format import RawEntityRecord
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.embedding import MockEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.scripted import Rule, ScriptedTransport
from kgrag.llm.templates import load_template

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "data" / "demo"


def extraction(entities, relations=()) -> str:
    """Bracketed records; relation endpoints are 1-based entity positions."""
    lines = [f'[entity | E{i} | {t} | "{n}" | {d}]' for i, (t, n, d) in enumerate(entities, start=1)]
    lines += [f'[relation | E{h} | {p} | E{t} | "{ev}"]' for h, p, t, ev in relations]
    return "\n".join(lines)


def answer(final: str, steps=("Look at the triples.",)) -> str:
    body = "\n".join(f"{i}. {s}" for i, s in enumerate(steps, start=1))
    return f"Reasoning Process:\n{body}\nFinal Answer:\n{final}\n"


def scripted_gateway(rules, defaults=None, dim: int = 64) -> tuple[Gateway, ScriptedTransport]:
    transport = ScriptedTransport(list(rules), dict(defaults or {}))
    return Gateway(transport, MockEmbedder(dim=dim, seed=7)), transport


def graph_from_triples(triples, source="c1") -> KnowledgeGraph:
    """Graph from (head, predicate, tail) name triples, all citing ``source``."""
    g = KnowledgeGraph()
    for h, p, t in triples:
        hid = g.upsert_entity(RawEntityRecord("E1", "Thing", h, ""), source)
        tid = g.upsert_entity(RawEntityRecord("E2", "Thing", t, ""), source)
        g.add_relation(hid, p, tid, f"{h} {p} {t}.", source, threshold=0.0)
    return g


def corpus_of(*texts: str, title: str = "") -> Corpus:
    return Corpus([Document(f"d{i}", title, t) for i, t in enumerate(texts, start=1)])


def template_example_block(template: str, start_marker: str, end_marker: str) -> str:
    """Text between two markers inside a shipped prompt template."""
    body = load_template(template).body
    start = body.index(start_marker) + len(start_marker)
    return body[start : body.index(end_marker, start)]


class HashScorer:
    """Deterministic per-path score; ``levels`` > 0 quantizes to force ties."""

    def __init__(self, levels: int = 0):
        self.levels = levels

    def score(self, g, query, paths):
        out = []
        for p in paths:
            h = int.from_bytes(hashlib.sha256("|".join(r.relation_id for r in p).encode()).digest()[:8], "big")
            x = h / 2**64
            out.append(math.floor(x * self.levels) / self.levels if self.levels else x)
        return out


def gateway() -> Gateway:
    return Gateway(ReplayTransport({}), MockEmbedder(dim=64, seed=1))


def random_graph(rng: random.Random, max_nodes: int = 8) -> KnowledgeGraph:
    n = rng.randint(1, max_nodes)
    names = [f"N{i}" for i in range(n)]
    triples = [(rng.choice(names), rng.choice(["p", "q", "r"]) + str(k), rng.choice(names)) for k in range(rng.randint(0, 2 * n))]
    g = graph_from_triples(triples)
    for name in names:  # isolated nodes too
        g.upsert_entity(RawEntityRecord("E1", "T", name, ""), "c1")
    return g


__all__ = [
    "HashScorer",
    "DEMO",
    "ROOT",
    "Rule",
    "answer",
    "corpus_of",
    "extraction",
    "graph_from_triples",
    "random_graph",
    "scripted_gateway",
    "template_example_block",
]
