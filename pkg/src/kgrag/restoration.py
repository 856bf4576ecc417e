"""Attach to each retrieved triple the source sentence most similar to it."""

from __future__ import annotations

from dataclasses import dataclass

from kgrag.corpus import Corpus, Sentence
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.gateway import Gateway
from kgrag.retrieval import PathElement, Subgraph, cosine


class EmptyCandidateSet(LookupError):
    pass


@dataclass(frozen=True)
class AugmentedTriple:
    head_name: str
    predicate: str
    tail_name: str
    context_sentence: str
    similarity: float
    # None when the relation's own evidence quote stood in for a corpus sentence.
    sentence_provenance: str | None


def verbalize(head_name: str, predicate: str, tail_name: str) -> str:
    return f"{head_name} {predicate} {tail_name}"


def candidate_sentences(g: KnowledgeGraph, corpus: Corpus, triple: PathElement) -> list[Sentence]:
    """Sentences of every loadable chunk in the union of both endpoints' sources."""
    out: list[Sentence] = []
    for chunk_id in sorted(g.sources_of_pair(triple.head, triple.tail)):
        out.extend(corpus.sentences(chunk_id))
    return out


def select_sentence(template_vec, sentences: list[Sentence], vectors) -> tuple[Sentence, float]:
    """Argmax cosine; exact ties go to the smallest ``(chunk_id, ordinal)``."""
    best: tuple[float, Sentence] | None = None
    for sent, vec in zip(sentences, vectors):
        sim = cosine(template_vec, vec)
        if (
            best is None
            or sim > best[0]
            or (sim == best[0] and (sent.chunk_id, sent.ordinal) < (best[1].chunk_id, best[1].ordinal))
        ):
            best = (sim, sent)
    if best is None:
        raise EmptyCandidateSet("no candidate sentences")
    return best[1], best[0]


def restore_context(g: KnowledgeGraph, corpus: Corpus, triple: PathElement, gateway: Gateway) -> AugmentedTriple:
    head, tail = g.entity(triple.head), g.entity(triple.tail)
    template = verbalize(head.name, triple.predicate, tail.name)
    sentences = candidate_sentences(g, corpus, triple)
    if not sentences:
        rel = g.find_relation(triple.head, triple.predicate, triple.tail)
        if rel is not None and rel.evidence.strip():
            vecs = gateway.embed([template, rel.evidence])
            return AugmentedTriple(head.name, triple.predicate, tail.name, rel.evidence, cosine(vecs[0], vecs[1]), None)
        raise EmptyCandidateSet(f"no source sentences for {template!r}")
    vecs = gateway.embed([template] + [s.text for s in sentences])
    best, sim = select_sentence(vecs[0], sentences, vecs[1:])
    return AugmentedTriple(head.name, triple.predicate, tail.name, best.text, sim, best.chunk_id)


def restore_subgraph(g: KnowledgeGraph, corpus: Corpus, sg: Subgraph, gateway: Gateway) -> list[AugmentedTriple]:
    """One augmented triple per unique path element, in first-seen path order."""
    return [restore_context(g, corpus, el, gateway) for el in sg.elements()]
