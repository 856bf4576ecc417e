"""Command-line entry point: ``build-kg``, ``query``, ``eval`` and ``stats``.

Exit codes: 0 success, 2 input error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from kgrag.config import ConfigError, RunConfig, resolve_config
from kgrag.construction import build_graph
from kgrag.corpus import CorpusError, load_corpus
from kgrag.evaluation import EngineConfig, load_dataset, run_benchmark
from kgrag.kg_store import GraphFormatError, KnowledgeGraph
from kgrag.llm.embedding import CacheFormatError, EmbeddingCache, MockEmbedder, OpenAIEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.transport import (
    EndpointSettings,
    GatewayError,
    LiveTransport,
    RecordingTransport,
    ReplayTransport,
)
from kgrag.reasoning import PipelineError, RoundTrace, read_traces, run_query, write_traces

log = logging.getLogger("kgrag")

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3


class InputError(Exception):
    pass


def make_gateway(cfg: RunConfig) -> Gateway:
    settings = None
    if cfg.transport == "replay":
        try:
            transport = ReplayTransport.from_file(cfg.replay)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot load replay fixture {cfg.replay}: {exc}") from exc
    else:
        try:
            settings = EndpointSettings.from_env()
        except GatewayError as exc:
            raise InputError(str(exc)) from exc
        transport = LiveTransport(settings)
    if cfg.record:
        transport = RecordingTransport(transport, cfg.record)

    embedder_kind = cfg.embedder
    if embedder_kind == "auto":
        embedder_kind = "mock" if cfg.transport == "replay" else "openai"
    if embedder_kind == "openai":
        settings = settings or EndpointSettings.from_env()
        embedder = OpenAIEmbedder(settings)
    else:
        embedder = MockEmbedder(cfg.embed_dim, cfg.embed_seed)

    cache = EmbeddingCache()
    if cfg.embedding_cache and Path(cfg.embedding_cache).exists():
        try:
            cache.load(cfg.embedding_cache)
        except CacheFormatError as exc:
            log.warning("ignoring unreadable embedding cache: %s", exc)
    return Gateway(transport, embedder, cache)


def _save_cache(gateway: Gateway, cfg: RunConfig) -> None:
    if cfg.embedding_cache:
        gateway.cache.save(cfg.embedding_cache, gateway.embedder.embedder_id)


def _load_graph(path: str) -> KnowledgeGraph:
    try:
        return KnowledgeGraph.load(Path(path).read_bytes())
    except OSError as exc:
        raise InputError(f"cannot read graph file {path}: {exc}") from exc
    except GraphFormatError as exc:
        raise InputError(f"invalid graph file {path}: {exc}") from exc


def _load_corpus(path: str, cfg: RunConfig):
    try:
        return load_corpus(path, cfg.max_len, cfg.overlap)
    except CorpusError as exc:
        raise InputError(str(exc)) from exc


def cmd_build_kg(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus = _load_corpus(args.corpus, cfg)
    gateway = make_gateway(cfg)
    graph, report = build_graph(corpus, gateway, KnowledgeGraph(dedup_threshold=cfg.dedup_threshold), cfg.workers)
    if report.chunks and report.failed_chunks == report.chunks:
        print(f"error: extraction failed for all {report.chunks} chunks", file=sys.stderr)
        return EXIT_PIPELINE
    Path(args.out).write_bytes(graph.persist())
    _save_cache(gateway, cfg)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_query(args: argparse.Namespace, cfg: RunConfig) -> int:
    graph = _load_graph(args.kg)
    graph.dedup_threshold = cfg.dedup_threshold
    corpus = _load_corpus(args.corpus, cfg)
    gateway = make_gateway(cfg)
    try:
        result = run_query(args.question, graph, corpus, gateway, cfg.loop_config())
    except PipelineError as exc:
        write_traces(args.trace, exc.traces)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    write_traces(args.trace, result.traces)
    if args.kg_out:
        Path(args.kg_out).write_bytes(graph.persist())
    _save_cache(gateway, cfg)
    print(result.answer.final_answer)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    try:
        dataset = load_dataset(args.dataset)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot load dataset {args.dataset}: {exc}") from exc
    gateway = make_gateway(cfg)
    engine = EngineConfig(cfg.max_len, cfg.overlap, cfg.loop_config(), cfg.graph_mode)
    report, traces = run_benchmark(dataset, gateway, engine, args.sample, args.seed, cfg.workers)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(report.per_round_csv(), encoding="utf-8")
    if args.trace_dir:
        out = Path(args.trace_dir)
        out.mkdir(parents=True, exist_ok=True)
        for qid, rounds in traces.items():
            write_traces(out / f"{qid.replace('/', '_')}.jsonl", rounds)
    _save_cache(gateway, cfg)
    print(f"EM {report.em:.4f}  F1 {report.f1:.4f}  n={report.n}", file=sys.stderr)
    return EXIT_OK


def stats_csv(trace_sets: Sequence[list[RoundTrace]], combine: str = "sum") -> str:
    """Round-indexed ``round,nodes,edges`` rows plus a cumulative Δ row.

    With several trace files, each round combines the per-file graph sizes
    (``sum`` for separate graphs, ``max`` for files that share one graph); a
    file that finished early contributes its last round to later rows.
    """
    fold = {"sum": sum, "max": max}[combine]
    trace_sets = [t for t in trace_sets if t]
    n_rounds = max(len(t) for t in trace_sets)
    rows = []
    for rnd in range(n_rounds):
        nodes = fold(t[min(rnd, len(t) - 1)].stats.nodes for t in trace_sets)
        edges = fold(t[min(rnd, len(t) - 1)].stats.edges for t in trace_sets)
        rows.append((rnd, nodes, edges))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "nodes", "edges"])
    writer.writerows(rows)
    writer.writerow(["Δ", rows[-1][1] - rows[0][1], rows[-1][2] - rows[0][2]])
    return buf.getvalue()


def cmd_stats(args: argparse.Namespace, cfg: RunConfig) -> int:
    root = Path(args.trace_dir)
    files = sorted(root.glob("*.jsonl")) if root.is_dir() else []
    try:
        trace_sets = [read_traces(f) for f in files]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"unreadable trace file in {root}: {exc}") from exc
    if not any(trace_sets):
        print(f"error: no traces found in {root}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(stats_csv(trace_sets, args.combine))
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help="flat TOML file with RunConfig keys")
    g.add_argument("--replay", help="replay fixture (JSON Lines of {hash, response}); implies replay transport")
    g.add_argument("--record", help="append every model exchange to this fixture file")
    g.add_argument("--transport", choices=["live", "replay"])
    g.add_argument("--embedder", choices=["auto", "mock", "openai"])
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--embedding-cache", help="binary embedding cache file to load and update")
    g.add_argument("--max-len", type=int)
    g.add_argument("--overlap", type=int)
    g.add_argument("--beam-width", type=int)
    g.add_argument("--max-depth", type=int)
    g.add_argument("--seed-k", type=int)
    g.add_argument("--dedup-threshold", type=float)
    g.add_argument("--enrich-k", type=int)
    g.add_argument("--i-max", type=int)
    g.add_argument("--stall-rounds", type=int)
    g.add_argument("--feedback-mode", choices=["query_driven", "answer_driven"])
    g.add_argument("--scorer", choices=["auto", "embedding", "llm"])
    g.add_argument("--workers", type=int)
    g.add_argument("--graph-mode", choices=["shared", "per_question"], help="eval only: one graph for all questions or one each")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgrag", description="Graph RAG with context restoration and feedback enrichment")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kg", help="extract a knowledge graph from a corpus")
    p.add_argument("--corpus", required=True, help="JSON Lines corpus of {id, title, text}")
    p.add_argument("--out", required=True, help="output .kg.jsonl graph file")
    _add_common(p)
    p.set_defaults(func=cmd_build_kg)

    p = sub.add_parser("query", help="answer one question, enriching the graph between rounds")
    p.add_argument("--kg", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--trace", default="trace.jsonl", help="round trace output (JSON Lines)")
    p.add_argument("--kg-out", help="write the enriched graph here")
    _add_common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="run the benchmark harness")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample", type=int, default=None, help="random sample size (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.add_argument("--csv", help="per-round CSV path (round,nodes,edges,em,f1)")
    p.add_argument("--trace-dir", help="write one trace file per example here")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-round graph sizes from trace files, as CSV")
    p.add_argument("--trace-dir", required=True)
    p.add_argument("--combine", choices=["sum", "max"], default="sum", help="sum for per-question graphs, max for a shared graph")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(vars(args), getattr(args, "config", None)) if args.command != "stats" else RunConfig()
        return args.func(args, cfg)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
