"""Build the initial knowledge graph from a corpus."""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from kgrag.corpus import Chunk, Corpus
from kgrag.extraction_format import parse_extraction
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.gateway import Gateway
from kgrag.llm.transport import GatewayError

log = logging.getLogger(__name__)


@dataclass
class BuildReport:
    chunks: int = 0
    entities: int = 0
    relations: int = 0
    failed_chunks: int = 0
    skipped_lines: int = 0
    parse_errors: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "chunks": self.chunks,
            "entities": self.entities,
            "relations": self.relations,
            "failed_chunks": self.failed_chunks,
            "skipped_lines": self.skipped_lines,
            "parse_errors": dict(sorted(self.parse_errors.items())),
        }


def _extract(gateway: Gateway, chunk: Chunk) -> str | GatewayError:
    try:
        return gateway.complete(gateway.render("triples_extraction", input_text=chunk.text))
    except GatewayError as exc:
        return exc


def build_graph(
    corpus: Corpus,
    gateway: Gateway,
    graph: KnowledgeGraph | None = None,
    workers: int = 1,
) -> tuple[KnowledgeGraph, BuildReport]:
    """Extract triples chunk by chunk and merge them into ``graph``.

    Model calls may run in parallel; merging is sequential in corpus order so
    the resulting graph does not depend on ``workers``.
    """
    g = graph if graph is not None else KnowledgeGraph()
    report = BuildReport(chunks=len(corpus))
    chunks = list(corpus)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        responses = list(pool.map(lambda c: _extract(gateway, c), chunks))
    for chunk, raw in zip(chunks, responses):
        if isinstance(raw, GatewayError):
            log.warning("extraction failed for %s: %s", chunk.chunk_id, raw)
            report.failed_chunks += 1
            continue
        batch = parse_extraction(raw, chunk.chunk_id)
        report.skipped_lines += batch.skipped_lines
        report.parse_errors.update(type(e).__name__ for e in batch.errors)
        g.merge_extraction(batch)
    report.entities = g.node_count
    report.relations = g.edge_count
    return g, report
