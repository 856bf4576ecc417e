from __future__ import annotations

import json

import pytest

from helpers import DEMO, Rule, answer, extraction
from kgrag.cli import main, stats_csv
from kgrag.construction import build_graph
from kgrag.corpus import load_corpus
from kgrag.kg_store import GraphStats, KnowledgeGraph
from kgrag.llm.embedding import MockEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.scripted import ScriptedTransport
from kgrag.llm.templates import render
from kgrag.llm.transport import RecordingTransport, prompt_hash
from kgrag.reasoning import ReasoningAnswer, RoundTrace, SubQuestionSet, run_query, write_traces

CURIE_TEXT = "Marie Curie shared the 1903 Nobel Prize in Physics with Pierre Curie and Henri Becquerel."
CURIE_OUT = extraction(
    [("Person", "Marie Curie", "Physicist and chemist"), ("Person", "Pierre Curie", "Physicist"), ("Person", "Henri Becquerel", "Physicist")],
    [(1, "shared Nobel Prize with", 2, "with Pierre Curie"), (1, "shared Nobel Prize with", 3, "Henri Becquerel")],
)
FILM_DOCS = [
    {"id": "inception", "title": "Inception", "text": "Inception is a 2010 science fiction film directed by Christopher Nolan."},
    {"id": "interstellar", "title": "Interstellar", "text": "Interstellar is a 2014 film directed by Christopher Nolan."},
]
FILM_Q = "Which director of a 2010 sci-fi movie also directed a film released in 2014?"


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def film_fixture(tmp_path):
    """Record a converged two-document run into a replay fixture."""
    corpus_path = write_jsonl(tmp_path / "films.jsonl", FILM_DOCS)
    fixture = tmp_path / "films_replay.jsonl"
    rules = [
        Rule("triples_extraction", [extraction([("Film", "Inception", "2010 film"), ("Person", "Christopher Nolan", "Director")], [(1, "directed by", 2, "directed by Christopher Nolan")])], ("Inception is",)),
        Rule("triples_extraction", [extraction([("Film", "Interstellar", "2014 film"), ("Person", "Christopher Nolan", "Director")], [(1, "directed by", 2, "directed by Christopher Nolan")])], ("Interstellar is",)),
        Rule("reasoning", [answer("Christopher Nolan")]),
        Rule("missing_knowledge", ["None"]),
    ]
    gw = Gateway(RecordingTransport(ScriptedTransport(rules), fixture), MockEmbedder())
    corpus = load_corpus(corpus_path)
    g, _ = build_graph(corpus, gw, KnowledgeGraph())
    run_query(FILM_Q, g, corpus, gw)
    return corpus_path, fixture


class TestBuildKg:
    def test_single_doc(self, tmp_path, capsys):
        corpus = write_jsonl(tmp_path / "c.jsonl", [{"id": "nobel", "title": "Nobel", "text": CURIE_TEXT}])
        fixture = write_jsonl(tmp_path / "fx.jsonl", [{"hash": prompt_hash(render("triples_extraction", input_text=CURIE_TEXT)), "response": CURIE_OUT}])
        out = tmp_path / "g.kg.jsonl"
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(out), "--replay", str(fixture)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert (report["entities"], report["relations"]) == (3, 2)
        assert KnowledgeGraph.load(out.read_bytes()).snapshot_stats() == GraphStats(0, 3, 2)

    def test_empty_corpus(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("")
        fixture = write_jsonl(tmp_path / "fx.jsonl", [])
        out = tmp_path / "g.kg.jsonl"
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(out), "--replay", str(fixture)]) == 0
        assert KnowledgeGraph.load(out.read_bytes()).node_count == 0

    def test_malformed_corpus(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("{oops\n")
        fixture = write_jsonl(tmp_path / "fx.jsonl", [])
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(tmp_path / "g"), "--replay", str(fixture)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_every_chunk_failing(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", [{"id": "a", "text": "unrecorded text"}])
        fixture = write_jsonl(tmp_path / "fx.jsonl", [])
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(tmp_path / "g"), "--replay", str(fixture)]) == 3

    def test_missing_fixture(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", [{"id": "a", "text": "x"}])
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(tmp_path / "g"), "--replay", str(tmp_path / "none")]) == 2

    def test_config_error(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", [{"id": "a", "text": "x"}])
        bad = tmp_path / "bad.toml"
        bad.write_text('api_key = "x"\n')
        assert main(["build-kg", "--corpus", str(corpus), "--out", str(tmp_path / "g"), "--config", str(bad)]) == 2


class TestQuery:
    def _graph(self, tmp_path, corpus_path, fixture):
        kg = tmp_path / "films.kg.jsonl"
        assert main(["build-kg", "--corpus", str(corpus_path), "--out", str(kg), "--replay", str(fixture)]) == 0
        return kg

    def test_converged(self, tmp_path, capsys):
        corpus_path, fixture = film_fixture(tmp_path)
        kg = self._graph(tmp_path, corpus_path, fixture)
        capsys.readouterr()
        trace = tmp_path / "trace.jsonl"
        code = main(["query", "--kg", str(kg), "--corpus", str(corpus_path), "--question", FILM_Q, "--trace", str(trace), "--replay", str(fixture)])
        assert code == 0
        assert capsys.readouterr().out.strip() == "Christopher Nolan"
        assert len(trace.read_text().splitlines()) == 1

    def test_missing_graph(self, tmp_path):
        corpus_path, fixture = film_fixture(tmp_path)
        code = main(["query", "--kg", str(tmp_path / "none.kg.jsonl"), "--corpus", str(corpus_path), "--question", "Q", "--replay", str(fixture)])
        assert code == 2

    def test_i_max_one(self, tmp_path):
        corpus_path, fixture = film_fixture(tmp_path)
        kg = self._graph(tmp_path, corpus_path, fixture)
        trace = tmp_path / "trace.jsonl"
        main(["query", "--kg", str(kg), "--corpus", str(corpus_path), "--question", FILM_Q, "--trace", str(trace), "--replay", str(fixture), "--i-max", "1"])
        assert len(trace.read_text().splitlines()) <= 1

    def test_unrecorded_question_is_pipeline_error(self, tmp_path):
        corpus_path, fixture = film_fixture(tmp_path)
        kg = self._graph(tmp_path, corpus_path, fixture)
        code = main(["query", "--kg", str(kg), "--corpus", str(corpus_path), "--question", "Something else?", "--trace", str(tmp_path / "t"), "--replay", str(fixture)])
        assert code == 3


def trace(round_index, nodes, edges):
    return RoundTrace(round_index, 0, 0, 0, ReasoningAnswer([], "x", "Final Answer: x"), SubQuestionSet([], round_index), (0, 0), GraphStats(round_index + 1, nodes, edges))


class TestStats:
    def test_single_round(self, tmp_path, capsys):
        write_traces(tmp_path / "a.jsonl", [trace(0, 4, 3)])
        assert main(["stats", "--trace-dir", str(tmp_path)]) == 0
        assert capsys.readouterr().out == "round,nodes,edges\n0,4,3\nΔ,0,0\n"

    def test_three_rounds(self):
        out = stats_csv([[trace(0, 10, 8), trace(1, 14, 13), trace(2, 15, 13)]])
        assert out.splitlines() == ["round,nodes,edges", "0,10,8", "1,14,13", "2,15,13", "Δ,5,5"]

    def test_files_sum_with_carry_forward(self):
        out = stats_csv([[trace(0, 1, 1), trace(1, 2, 2)], [trace(0, 10, 10)]])
        assert out.splitlines()[1:] == ["0,11,11", "1,12,12", "Δ,1,1"]
        assert stats_csv([[trace(0, 1, 1), trace(1, 2, 2)], [trace(0, 10, 10)]], "max").splitlines()[1:3] == ["0,10,10", "1,10,10"]

    def test_empty_dir(self, tmp_path):
        assert main(["stats", "--trace-dir", str(tmp_path)]) == 2

    def test_corrupt_trace(self, tmp_path):
        (tmp_path / "a.jsonl").write_text("{nope\n")
        assert main(["stats", "--trace-dir", str(tmp_path)]) == 2


class TestEval:
    def test_demo_replay(self, tmp_path, capsys):
        report, csv_path, traces = tmp_path / "r.json", tmp_path / "r.csv", tmp_path / "traces"
        code = main(["eval", "--dataset", str(DEMO / "qa.jsonl"), "--replay", str(DEMO / "qa_replay.jsonl"), "--report", str(report), "--csv", str(csv_path), "--trace-dir", str(traces)])
        assert code == 0
        data = json.loads(report.read_text())
        assert data["n"] == 10 and data["em"] == pytest.approx(0.8) and data["f1"] == pytest.approx(0.9)
        assert csv_path.read_text().startswith("round,nodes,edges,em,f1\n")
        assert len(list(traces.glob("*.jsonl"))) == 10

    def test_missing_dataset(self, tmp_path):
        assert main(["eval", "--dataset", str(tmp_path / "none"), "--replay", str(DEMO / "qa_replay.jsonl")]) == 2
