"""Exact Match / token F1 scoring and the benchmark driver.

Normalization follows the SQuAD evaluation script: lowercase, drop
punctuation and the articles a/an/the, collapse whitespace.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from kgrag.construction import build_graph
from kgrag.corpus import DEFAULT_MAX_LEN, DEFAULT_OVERLAP, Corpus, Document
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.gateway import Gateway
from kgrag.llm.transport import GatewayError
from kgrag.reasoning import LoopConfig, MissingFinalAnswer, PipelineError, RoundTrace, format_input, generate_answer, run_query

log = logging.getLogger(__name__)


def normalize_answer(s: str) -> str:
    s = s.lower()
    s = "".join(ch for ch in s if ch not in string.punctuation)
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def exact_match(pred: str, golds: Sequence[str]) -> int:
    if not golds:
        raise ValueError("at least one gold answer is required")
    p = normalize_answer(pred)
    return int(any(p == normalize_answer(g) for g in golds))


def _f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(pred: str, golds: Sequence[str]) -> float:
    """Best token-multiset F1 over the gold answers."""
    if not golds:
        raise ValueError("at least one gold answer is required")
    p = normalize_answer(pred).split()
    return max(_f1(p, normalize_answer(g).split()) for g in golds)


@dataclass
class QAExample:
    qid: str
    question: str
    gold_answers: list[str]
    context_docs: list[Document]

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise ValueError(f"example {self.qid!r} has no gold answers")


def load_dataset(path: str | Path) -> list[QAExample]:
    """Read ``{id?, question, answers, contexts: [{title, text}]}`` records.

    Accepts a JSON array or JSON Lines. ``answers`` may be a string or a list.
    Native HotpotQA records (``_id``, ``answer``, ``context`` as
    ``[title, [sentence, ...]]`` pairs) are accepted as well.
    """
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        records = json.loads(text)
    else:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    examples = []
    for n, rec in enumerate(records):
        qid = str(rec.get("id", rec.get("_id", f"q{n:06d}")))
        answers = rec.get("answers", rec.get("answer"))
        if isinstance(answers, str):
            answers = [answers]
        if "contexts" in rec:
            pairs = [(str(c.get("title", "")), str(c["text"])) for c in rec["contexts"]]
        else:
            pairs = [(str(title), " ".join(sents)) for title, sents in rec.get("context", [])]
        docs = [Document(doc_id=f"{qid}/d{j}", title=t, text=x) for j, (t, x) in enumerate(pairs)]
        examples.append(QAExample(qid, rec["question"], list(answers or []), docs))
    return examples


@dataclass
class ExampleResult:
    qid: str
    prediction: str
    em: int
    f1: float
    round_answers: list[str] = field(default_factory=list)
    round_stats: list[tuple[int, int]] = field(default_factory=list)
    error: str | None = None
    golds: list[str] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "prediction": self.prediction,
            "em": self.em,
            "f1": self.f1,
            "rounds": len(self.round_answers),
            "error": self.error,
        }


@dataclass
class RoundMetrics:
    round: int
    em: float
    f1: float
    nodes: int
    edges: int


@dataclass
class MetricReport:
    em: float
    f1: float
    n: int
    per_round: list[RoundMetrics]
    examples: list[ExampleResult]
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "em": self.em,
            "f1": self.f1,
            "per_round": [vars(r) for r in self.per_round],
            "examples": [e.to_dict() for e in self.examples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def per_round_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "nodes", "edges", "em", "f1"])
        for r in self.per_round:
            writer.writerow([r.round, r.nodes, r.edges, f"{r.em:.4f}", f"{r.f1:.4f}"])
        return buf.getvalue()


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def aggregate(results: list[ExampleResult], seed: int | None = None, shared_graph: bool = False) -> MetricReport:
    """Fold per-example results (ordered by qid) into overall and per-round means.

    An example that stopped at round ``r`` contributes its round-``r`` answer
    and graph size to every later round row. Graph sizes are summed over
    examples, except with a shared graph, where each row reports the largest
    size any example observed at that round.
    """
    results = sorted(results, key=lambda r: r.qid)
    n_rounds = max((len(r.round_answers) for r in results), default=0)
    per_round = []
    for rnd in range(n_rounds):
        ems, f1s, nodes, edges = [], [], 0, 0
        for r in results:
            if not r.round_answers or r.error:
                ems.append(0)
                f1s.append(0.0)
                continue
            idx = min(rnd, len(r.round_answers) - 1)
            ems.append(exact_match(r.round_answers[idx], r.golds))
            f1s.append(token_f1(r.round_answers[idx], r.golds))
            n, e = r.round_stats[idx]
            nodes, edges = (max(nodes, n), max(edges, e)) if shared_graph else (nodes + n, edges + e)
        per_round.append(RoundMetrics(rnd, _mean(ems), _mean(f1s), nodes, edges))
    return MetricReport(
        em=_mean([r.em for r in results]),
        f1=_mean([r.f1 for r in results]),
        n=len(results),
        per_round=per_round,
        examples=results,
        seed=seed,
    )


GRAPH_MODES = ("shared", "per_question")


@dataclass
class EngineConfig:
    max_len: int = DEFAULT_MAX_LEN
    overlap: int = DEFAULT_OVERLAP
    loop: LoopConfig = field(default_factory=LoopConfig)
    # "shared": one graph over every sampled example's documents, enriched by
    # each question in qid order. "per_question": an isolated graph per example.
    graph_mode: str = "shared"


def evaluate_example(
    ex: QAExample,
    gateway: Gateway,
    config: EngineConfig,
    shared: tuple[KnowledgeGraph, Corpus] | None = None,
) -> tuple[ExampleResult, list[RoundTrace]]:
    """Run the loop for one example and score it; failures score zero.

    Without ``shared`` the example gets its own freshly built graph.
    """
    traces: list[RoundTrace] = []
    try:
        if shared is None:
            corpus = Corpus(ex.context_docs, max_len=config.max_len, overlap=config.overlap)
            g, _ = build_graph(corpus, gateway, KnowledgeGraph(dedup_threshold=config.loop.dedup_threshold))
        else:
            g, corpus = shared
        result = run_query(ex.question, g, corpus, gateway, config.loop)
        traces = result.traces
        pred = result.answer.final_answer
        res = ExampleResult(
            ex.qid,
            pred,
            exact_match(pred, ex.gold_answers),
            token_f1(pred, ex.gold_answers),
            [t.answer.final_answer for t in traces],
            [(t.stats.nodes, t.stats.edges) for t in traces],
        )
    except (PipelineError, GatewayError, ValueError) as exc:
        log.warning("example %s failed: %s", ex.qid, exc)
        traces = getattr(exc, "traces", traces)
        res = ExampleResult(ex.qid, "", 0, 0.0, error=f"{type(exc).__name__}: {exc}")
    res.golds = list(ex.gold_answers)
    return res, traces


def sample_examples(dataset: list[QAExample], sample_size: int | None, seed: int) -> list[QAExample]:
    if sample_size is not None and sample_size < len(dataset):
        dataset = random.Random(seed).sample(dataset, sample_size)
    return sorted(dataset, key=lambda e: e.qid)


def run_benchmark(
    dataset: list[QAExample],
    gateway: Gateway,
    config: EngineConfig | None = None,
    sample_size: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> tuple[MetricReport, dict[str, list[RoundTrace]]]:
    """Evaluate a seeded sample of ``dataset``.

    In shared mode the examples run sequentially against one graph so the
    outcome does not depend on scheduling; ``workers`` then only parallelizes
    the initial extraction.
    """
    config = config or EngineConfig()
    if config.graph_mode not in GRAPH_MODES:
        raise ValueError(f"unknown graph_mode {config.graph_mode!r}")
    examples = sample_examples(dataset, sample_size, seed)
    if config.graph_mode == "shared":
        docs = [d for ex in examples for d in ex.context_docs]
        corpus = Corpus(docs, max_len=config.max_len, overlap=config.overlap)
        g, _ = build_graph(corpus, gateway, KnowledgeGraph(dedup_threshold=config.loop.dedup_threshold), workers)
        outcomes = [evaluate_example(ex, gateway, config, (g, corpus)) for ex in examples]
    else:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            outcomes = list(pool.map(lambda ex: evaluate_example(ex, gateway, config), examples))
    report = aggregate([res for res, _ in outcomes], seed, config.graph_mode == "shared")
    return report, {res.qid: traces for res, traces in outcomes}


def run_baseline(
    dataset: list[QAExample], gateway: Gateway, sample_size: int | None = None, seed: int = 0
) -> MetricReport:
    """Answer with an empty graph context, for comparison against the full loop."""
    results = []
    for ex in sample_examples(dataset, sample_size, seed):
        try:
            pred = generate_answer(format_input(ex.question, []), gateway).final_answer
            res = ExampleResult(ex.qid, pred, exact_match(pred, ex.gold_answers), token_f1(pred, ex.gold_answers), [pred], [(0, 0)])
        except (GatewayError, MissingFinalAnswer) as exc:
            res = ExampleResult(ex.qid, "", 0, 0.0, error=f"{type(exc).__name__}: {exc}")
        res.golds = list(ex.gold_answers)
        results.append(res)
    return aggregate(results, seed)
