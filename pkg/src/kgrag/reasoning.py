"""Iterative answer generation with graph enrichment between rounds.

Each round retrieves a subgraph from the current graph, restores source
sentences for its triples, asks the model for an answer, then feeds missing
knowledge back into the graph. Query-driven feedback turns the answer into
sub-questions and extracts new triples from chunks retrieved for each of
them; answer-driven feedback extracts triples from the answer text itself.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from kgrag.corpus import Corpus
from kgrag.extraction_format import parse_extraction
from kgrag.kg_store import DEFAULT_DEDUP_THRESHOLD, GraphStats, KnowledgeGraph
from kgrag.llm.gateway import Gateway
from kgrag.llm.templates import render
from kgrag.llm.transport import GatewayError, ReplayMiss
from kgrag.restoration import AugmentedTriple, EmptyCandidateSet, restore_context
from kgrag.retrieval import (
    DEFAULT_BEAM_WIDTH,
    DEFAULT_MAX_DEPTH,
    DEFAULT_SEED_K,
    EmbeddingScorer,
    LLMScorer,
    PathScorer,
    dense_retrieve,
    retrieve_subgraph,
)

log = logging.getLogger(__name__)

I_MAX = 20


class FeedbackMode(str, Enum):
    QUERY_DRIVEN = "query_driven"
    ANSWER_DRIVEN = "answer_driven"


class MissingFinalAnswer(ValueError):
    pass


class PipelineError(RuntimeError):
    """Unrecoverable loop failure; ``traces`` holds the rounds completed so far."""

    def __init__(self, message: str, traces: list[RoundTrace]):
        super().__init__(message)
        self.traces = traces


@dataclass
class ReasoningAnswer:
    reasoning_steps: list[str]
    final_answer: str
    raw_response: str


@dataclass
class SubQuestionSet:
    questions: list[str]
    round: int

    def __bool__(self) -> bool:
        return bool(self.questions)


@dataclass
class RoundTrace:
    round: int
    subgraph_paths: int
    subgraph_triples: int
    augmented_triples: int
    answer: ReasoningAnswer
    sub_questions: SubQuestionSet
    enrichment: tuple[int, int]
    stats: GraphStats
    context: list[list[str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enrichment"] = {"entities_added": self.enrichment[0], "relations_added": self.enrichment[1]}
        d["sub_questions"] = self.sub_questions.questions
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RoundTrace:
        return cls(
            round=d["round"],
            subgraph_paths=d["subgraph_paths"],
            subgraph_triples=d["subgraph_triples"],
            augmented_triples=d["augmented_triples"],
            answer=ReasoningAnswer(**d["answer"]),
            sub_questions=SubQuestionSet(list(d["sub_questions"]), d["round"]),
            enrichment=(d["enrichment"]["entities_added"], d["enrichment"]["relations_added"]),
            stats=GraphStats(**d["stats"]),
            context=d.get("context", []),
        )


@dataclass
class LoopConfig:
    i_max: int = I_MAX
    feedback_mode: FeedbackMode = FeedbackMode.QUERY_DRIVEN
    beam_width: int = DEFAULT_BEAM_WIDTH
    max_depth: int = DEFAULT_MAX_DEPTH
    seed_k: int = DEFAULT_SEED_K
    enrich_k: int = 5
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD
    # Stop after this many consecutive rounds that add nothing to the graph.
    stall_rounds: int = 2
    scorer: str = "auto"


@dataclass
class QueryResult:
    answer: ReasoningAnswer
    traces: list[RoundTrace]


# -- prompt assembly ---------------------------------------------------------


def _one_line(text: str) -> str:
    return " ".join(text.split())


def format_triples(triples: Iterable[AugmentedTriple]) -> str:
    return "\n".join(f"<{t.head_name} | {t.predicate} | {t.tail_name}>" for t in triples)


def format_context(augmented: list[AugmentedTriple]) -> str:
    """The ``Triples:`` / ``Related Text:`` block used by the reasoning prompts."""
    sentences = dict.fromkeys(_one_line(t.context_sentence) for t in augmented if t.context_sentence.strip())
    return "Triples:\n" + format_triples(augmented) + "\nRelated Text:\n" + "\n".join(sentences)


def format_input(question: str, augmented: list[AugmentedTriple]) -> str:
    if not question.strip():
        raise ValueError("question must be non-empty")
    return render("reasoning", text=format_context(augmented), question=question)


# -- response parsing --------------------------------------------------------

_FINAL_RE = re.compile(r"^[\s>#*_\-]*final[ \t]+answer\b[\s*_]*:?[ \t*_]*(.*)$", re.IGNORECASE | re.MULTILINE)
_STEP_RE = re.compile(r"^\s*(?:step\s*)?\d+[.):]\s+(.+)$", re.IGNORECASE)
_MARKUP = " \t*_`"


def parse_answer(raw: str) -> ReasoningAnswer:
    """Pull the numbered reasoning steps and the ``Final Answer:`` phrase out of a response."""
    matches = list(_FINAL_RE.finditer(raw))
    if not matches:
        raise MissingFinalAnswer("response has no 'Final Answer' heading")
    last = matches[-1]
    answer = last.group(1).strip(_MARKUP)
    if not answer:
        for line in raw[last.end() :].splitlines():
            if line.strip(_MARKUP):
                answer = line.strip(_MARKUP)
                break
    if not answer:
        raise MissingFinalAnswer("'Final Answer' heading has no content")
    steps = []
    for line in raw[: last.start()].splitlines():
        m = _STEP_RE.match(line)
        if m:
            steps.append(m.group(1).strip().replace("**", "").rstrip(":").strip())
    return ReasoningAnswer(steps, answer, raw)


_BULLET_RE = re.compile(r"^(?:[-*•]+|\d+[.)])\s+")
_NOTHING_RE = re.compile(
    r"^(?:none|n/?a|nothing|no (?:missing|further|additional)\b.*|output:?|```\w*)\.?$",
    re.IGNORECASE,
)


def parse_sub_questions(raw: str, round_index: int = 0) -> SubQuestionSet:
    questions: list[str] = []
    for line in raw.splitlines():
        q = _BULLET_RE.sub("", line.strip()).strip()
        if not q or _NOTHING_RE.match(q) or q in questions:
            continue
        questions.append(q)
    return SubQuestionSet(questions, round_index)


# -- loop steps --------------------------------------------------------------


def generate_answer(prompt: str, gateway: Gateway) -> ReasoningAnswer:
    """Complete and parse; a failed parse is retried once unless the transport is deterministic."""
    raw = gateway.complete(prompt)
    try:
        return parse_answer(raw)
    except MissingFinalAnswer:
        if gateway.deterministic:
            raise
        log.warning("answer had no final answer section, retrying once")
        return parse_answer(gateway.complete(prompt))


def identify_missing(
    question: str,
    answer: ReasoningAnswer,
    augmented: list[AugmentedTriple],
    gateway: Gateway,
    round_index: int = 0,
) -> SubQuestionSet:
    context = format_context(augmented) + "\nCurrent Answer:\n" + answer.final_answer
    raw = gateway.complete(gateway.render("missing_knowledge", context_info=context, question=question))
    return parse_sub_questions(raw, round_index)


def enrich(
    g: KnowledgeGraph,
    corpus: Corpus,
    subq: SubQuestionSet,
    gateway: Gateway,
    k: int = 5,
    existing: list[AugmentedTriple] | None = None,
    threshold: float | None = None,
) -> tuple[int, int]:
    """Retrieve chunks per sub-question, extract triples from them, merge into ``g``.

    New items cite the retrieved chunks as provenance. A sub-question whose
    extraction has no recorded response is logged and skipped.
    """
    existing_block = format_triples(existing or [])
    total_entities = total_relations = 0
    for question in subq.questions:
        ranked = dense_retrieve(question, corpus, gateway, k)
        if not ranked:
            continue
        lines = []
        for rc in ranked:
            chunk = corpus.chunks[rc.chunk_id]
            text = _one_line(chunk.text)
            lines.append(f"{chunk.title} | {text}" if chunk.title else text)
        prompt = gateway.render(
            "kg_enrichment", context_info=existing_block, sub_questions=question, context="\n".join(lines)
        )
        try:
            raw = gateway.complete(prompt)
        except ReplayMiss as exc:
            log.warning("skipping sub-question %r: %s", question, exc)
            continue
        batch = parse_extraction(raw)
        if batch.errors:
            log.info("enrichment for %r: %d format violation(s)", question, len(batch.errors))
        e, r = g.merge_extraction(batch, sources=[rc.chunk_id for rc in ranked], threshold=threshold)
        total_entities += e
        total_relations += r
    return total_entities, total_relations


def enrich_from_answer(
    g: KnowledgeGraph, answer: ReasoningAnswer, gateway: Gateway, round_index: int, threshold: float | None = None
) -> tuple[int, int, bool]:
    """Answer-driven feedback: extract triples straight from the response text.

    Returns ``(entities_added, relations_added, extracted_anything)``.
    """
    raw = gateway.complete(gateway.render("triples_extraction", input_text=answer.raw_response))
    batch = parse_extraction(raw)
    e, r = g.merge_extraction(batch, sources=[f"answer:{round_index}"], threshold=threshold)
    return e, r, bool(batch.entities or batch.relations)


def _make_scorer(config: LoopConfig, gateway: Gateway) -> PathScorer:
    kind = config.scorer
    if kind == "auto":
        kind = "embedding" if gateway.deterministic else "llm"
    if kind == "llm":
        return LLMScorer(gateway)
    if kind == "embedding":
        return EmbeddingScorer(gateway)
    raise ValueError(f"unknown scorer {config.scorer!r}")


def restore_all(g: KnowledgeGraph, corpus: Corpus, elements, gateway: Gateway) -> list[AugmentedTriple]:
    out = []
    for el in elements:
        try:
            out.append(restore_context(g, corpus, el, gateway))
        except EmptyCandidateSet as exc:
            log.warning("dropping triple without restorable context: %s", exc)
    return out


def run_query(
    question: str,
    g: KnowledgeGraph,
    corpus: Corpus,
    gateway: Gateway,
    config: LoopConfig | None = None,
) -> QueryResult:
    """Answer ``question``, enriching ``g`` in place between rounds.

    Stops when a round yields no missing knowledge, after ``stall_rounds``
    consecutive rounds that add nothing, or after ``i_max`` rounds. Every
    round advances ``g.round`` by one, so round ``i`` writes graph version
    ``i + 1`` (offset by any rounds the graph had already seen).
    """
    config = config or LoopConfig()
    if config.i_max < 1:
        raise ValueError("i_max must be >= 1")
    mode = FeedbackMode(config.feedback_mode)
    scorer = _make_scorer(config, gateway)
    traces: list[RoundTrace] = []
    stalled = 0
    answer: ReasoningAnswer | None = None
    for i in range(config.i_max):
        try:
            sg = retrieve_subgraph(g, question, gateway, scorer, config.beam_width, config.max_depth, config.seed_k)
            elements = sg.elements()
            augmented = restore_all(g, corpus, elements, gateway)
            answer = generate_answer(format_input(question, augmented), gateway)
            g.round += 1
            if mode is FeedbackMode.QUERY_DRIVEN:
                subq = identify_missing(question, answer, augmented, gateway, i)
                added = enrich(g, corpus, subq, gateway, config.enrich_k, augmented, config.dedup_threshold) if subq else (0, 0)
                converged = not subq
            else:
                subq = SubQuestionSet([], i)
                e, r, extracted = enrich_from_answer(g, answer, gateway, i, config.dedup_threshold)
                added = (e, r)
                converged = not extracted
        except (GatewayError, MissingFinalAnswer) as exc:
            raise PipelineError(f"round {i} failed: {exc}", traces) from exc
        traces.append(
            RoundTrace(
                round=i,
                subgraph_paths=len(sg.paths),
                subgraph_triples=len(elements),
                augmented_triples=len(augmented),
                answer=answer,
                sub_questions=subq,
                enrichment=added,
                stats=g.snapshot_stats(),
                context=[[t.head_name, t.predicate, t.tail_name, t.context_sentence] for t in augmented],
            )
        )
        if converged:
            break
        stalled = stalled + 1 if added == (0, 0) else 0
        if stalled >= config.stall_rounds:
            log.info("stopping after %d rounds without graph growth", stalled)
            break
    assert answer is not None
    return QueryResult(answer, traces)


def dump_traces(traces: list[RoundTrace]) -> str:
    return "".join(json.dumps(t.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for t in traces)


def write_traces(path: str | Path, traces: list[RoundTrace]) -> None:
    Path(path).write_text(dump_traces(traces), encoding="utf-8")


def read_traces(path: str | Path) -> list[RoundTrace]:
    with open(path, encoding="utf-8") as fh:
        return [RoundTrace.from_dict(json.loads(line)) for line in fh if line.strip()]
