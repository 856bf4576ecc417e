"""Knowledge-graph retrieval-augmented QA with sentence restoration and feedback enrichment."""

from kgrag.construction import BuildReport, build_graph
from kgrag.corpus import Chunk, Corpus, Document, Sentence, chunk_bounds, load_corpus, split_sentences
from kgrag.evaluation import MetricReport, exact_match, run_benchmark, token_f1
from kgrag.extraction_format import ExtractionBatch, parse_extraction, serialize_batch
from kgrag.kg_store import Entity, GraphStats, KnowledgeGraph, Relation
from kgrag.llm import Gateway, MockEmbedder, ReplayTransport
from kgrag.reasoning import FeedbackMode, LoopConfig, QueryResult, RoundTrace, run_query
from kgrag.restoration import AugmentedTriple, restore_context
from kgrag.retrieval import Subgraph, beam_search_subgraph, retrieve_subgraph

__version__ = "0.1.0"

__all__ = [
    "AugmentedTriple",
    "BuildReport",
    "Chunk",
    "Corpus",
    "Document",
    "Entity",
    "ExtractionBatch",
    "FeedbackMode",
    "Gateway",
    "GraphStats",
    "KnowledgeGraph",
    "LoopConfig",
    "MetricReport",
    "MockEmbedder",
    "QueryResult",
    "Relation",
    "ReplayTransport",
    "RoundTrace",
    "Sentence",
    "Subgraph",
    "beam_search_subgraph",
    "build_graph",
    "chunk_bounds",
    "exact_match",
    "load_corpus",
    "parse_extraction",
    "restore_context",
    "retrieve_subgraph",
    "run_benchmark",
    "run_query",
    "serialize_batch",
    "split_sentences",
    "token_f1",
]
