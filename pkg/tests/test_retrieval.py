from __future__ import annotations

import random

import numpy as np
import pytest

from helpers import HashScorer, Rule, corpus_of, graph_from_triples, random_graph, scripted_gateway
from kgrag.extraction_format import RawEntityRecord
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.embedding import MockEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.transport import ReplayTransport
from kgrag.retrieval import (
    DimensionMismatch,
    EmbeddingScorer,
    LLMScorer,
    PathElement,
    ZeroVector,
    beam_search_subgraph,
    cosine,
    dense_retrieve,
    retrieve_subgraph,
    seed_entities,
    verbalize_path,
)
from oracles import exhaustive_paths, scalar_cosine


def gateway() -> Gateway:
    return Gateway(ReplayTransport({}), MockEmbedder(dim=64, seed=1))


class TestCosine:
    def test_self(self):
        assert cosine([3.0, 4.0], [3.0, 4.0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == 0.0

    def test_diagonal(self):
        assert cosine([1, 1], [1, 0]) == pytest.approx(0.70710678, abs=1e-8)

    def test_errors(self):
        with pytest.raises(ZeroVector):
            cosine([0, 0], [1, 0])
        with pytest.raises(DimensionMismatch):
            cosine([1, 0], [1, 0, 0])

    def test_against_scalar_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = int(rng.integers(1, 300))
            u, v = rng.standard_normal(d), rng.standard_normal(d)
            assert abs(cosine(u, v) - scalar_cosine(u, v)) <= 1e-9


class TestSeeds:
    def test_verbatim_name_ranks_first(self):
        g = graph_from_triples([("Inception", "directed by", "Christopher Nolan"), ("Interstellar", "stars", "Matthew McConaughey")])
        gw = gateway()
        seeds = seed_entities(g, "Tell me about Matthew McConaughey", gw, k=2)
        # Brute-force cosine over every entity.
        q = gw.embed(["Tell me about Matthew McConaughey"])[0]
        sims = {eid: scalar_cosine(q, gw.embed([f"{e.name}: {e.description}"])[0]) for eid, e in g.entities.items()}
        assert seeds[0] == max(sims, key=sims.get) == g.find_entity("Matthew McConaughey").entity_id

    def test_empty_graph(self):
        assert seed_entities(KnowledgeGraph(), "q", gateway()) == []

    def test_k_clamped(self):
        g = graph_from_triples([("A", "r", "B")])
        assert sorted(seed_entities(g, "q", gateway(), k=10)) == sorted(g.entities)


class TestBeamSearch:
    def test_chain(self):
        g = graph_from_triples([("A", "r1", "B"), ("B", "r2", "C")])
        a = g.find_entity("A").entity_id
        sg = beam_search_subgraph(g, "q", [a], HashScorer(), beam_width=1, max_depth=2)
        (path,) = sg.paths
        names = [(g.entity(e.head).name, e.predicate, g.entity(e.tail).name) for e in path.elements]
        assert names == [("A", "r1", "B"), ("B", "r2", "C")]

    def test_isolated_seed(self):
        g = graph_from_triples([("A", "r", "B")])
        lone = g.upsert_entity(RawEntityRecord("E1", "T", "Lonely", ""), "c1")
        assert beam_search_subgraph(g, "q", [lone], HashScorer()).paths == []

    def test_walks_against_edge_direction(self):
        g = graph_from_triples([("A", "r1", "B")])
        b = g.find_entity("B").entity_id
        (path,) = beam_search_subgraph(g, "q", [b], HashScorer(), max_depth=2).paths
        assert path.elements == (PathElement(g.find_entity("A").entity_id, "r1", b),)

    def test_width_limits_paths(self):
        g = graph_from_triples([("A", f"r{i}", f"B{i}") for i in range(6)])
        a = g.find_entity("A").entity_id
        assert len(beam_search_subgraph(g, "q", [a], HashScorer(), beam_width=2, max_depth=1).paths) == 2

    @pytest.mark.parametrize("levels", [0, 3])
    def test_small_graphs_match_exhaustive(self, levels):
        rng = random.Random(levels)
        scorer = HashScorer(levels)
        for _ in range(60):
            g = random_graph(rng, 6)
            seeds = rng.sample(sorted(g.entities), min(2, len(g.entities)))
            depth = rng.randint(1, 3)
            expected = exhaustive_paths(g, seeds, scorer, "q", depth)
            got = beam_search_subgraph(g, "q", seeds, scorer, beam_width=max(1, len(expected)) + 50, max_depth=depth)
            assert [(p.seed, p.relation_ids, p.score) for p in got.paths] == expected

    def test_isolated_seed_takes_no_slot(self):
        g = graph_from_triples([("A", "r1", "B")])
        lone = g.upsert_entity(RawEntityRecord("E1", "T", "Lone", ""), "c1")
        a = g.find_entity("A").entity_id
        sg = beam_search_subgraph(g, "q", [lone, a], HashScorer(), beam_width=1, max_depth=2)
        assert [p.relation_ids for p in sg.paths] == [("r1",)]

    def test_elements_unique(self):
        g = graph_from_triples([("A", "r1", "B"), ("B", "r2", "C")])
        ids = sorted(g.entities)
        sg = beam_search_subgraph(g, "q", ids, HashScorer(), beam_width=10, max_depth=2)
        els = sg.elements()
        assert len(els) == len(set(els)) == 2

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            beam_search_subgraph(KnowledgeGraph(), "q", [], HashScorer(), beam_width=0)

    def test_embedding_scorer_batch_independent(self):
        g = graph_from_triples([("A", "r1", "B"), ("B", "r2", "C"), ("C", "r3", "A")])
        rels = list(g.relations.values())
        s = EmbeddingScorer(gateway())
        together = s.score(g, "A r1 B", [[r] for r in rels])
        alone = [s.score(g, "A r1 B", [[r]])[0] for r in rels]
        assert together == alone
        assert together[0] == max(together)
        assert verbalize_path(g, rels[:2]) == "A r1 B. B r2 C"

    def test_retrieve_subgraph_end_to_end(self):
        g = graph_from_triples([("Inception", "directed by", "Christopher Nolan"), ("Christopher Nolan", "born in", "London")])
        sg = retrieve_subgraph(g, "Where was the director of Inception born?", gateway())
        assert sg.paths and all(p.seed in g.entities for p in sg.paths)


class TestLLMScorer:
    def test_parses_scores(self):
        g = graph_from_triples([("A", "r1", "B"), ("A", "r2", "C")])
        gw, _ = scripted_gateway([Rule("path_pruning", ["1: 0.2\n2: 0.9\n7: 1.0"])])
        rels = [[r] for r in g.relations.values()]
        assert LLMScorer(gw).score(g, "q", rels) == [0.2, 0.9]

    def test_falls_back_on_failure(self):
        g = graph_from_triples([("A", "r1", "B")])
        gw, _ = scripted_gateway([])
        rels = [[r] for r in g.relations.values()]
        assert LLMScorer(gw).score(g, "A r1 B", rels) == EmbeddingScorer(gw).score(g, "A r1 B", rels)


class TestDenseRetrieve:
    def test_single_overlapping_chunk(self):
        corpus = corpus_of("zebra quagga okapi", "granite basalt", "violin cello")
        ranked = dense_retrieve("which rock is basalt", corpus, gateway(), k=1)
        assert [r.chunk_id for r in ranked] == ["d2#0001"]

    def test_k_clamped_and_sorted(self):
        corpus = corpus_of("a b", "c d", "e f")
        ranked = dense_retrieve("a", corpus, gateway(), k=10)
        assert len(ranked) == 3
        assert [r.similarity for r in ranked] == sorted((r.similarity for r in ranked), reverse=True)

    def test_identical_chunks_adjacent_by_id(self):
        corpus = corpus_of("same text", "other words", "same text")
        ranked = dense_retrieve("same text", corpus, gateway(), k=3)
        assert [r.chunk_id for r in ranked[:2]] == ["d1#0001", "d3#0001"]

    def test_empty_and_bad_k(self):
        assert dense_retrieve("q", corpus_of(), gateway()) == []
        with pytest.raises(ValueError):
            dense_retrieve("q", corpus_of("x"), gateway(), k=0)
