"""Regenerate the bundled demo corpus, QA set and their replay fixtures.

The model side is a rule-based script: each rule matches one prompt kind plus
some needle text and returns a hand-written response. Running the real
pipeline over it through a recording transport yields hash-keyed fixtures
that later runs replay without any network access.

    python3 scripts/make_demo_fixtures.py [--out data/demo]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from kgrag.construction import build_graph
from kgrag.corpus import Corpus, Document
from kgrag.evaluation import EngineConfig, load_dataset, run_benchmark
from kgrag.kg_store import KnowledgeGraph
from kgrag.llm.embedding import EmbeddingCache, MockEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.scripted import Rule, ScriptedTransport
from kgrag.llm.transport import RecordingTransport
from kgrag.reasoning import LoopConfig, run_query

DEMO_QUESTION = "In which city was the director of Inception born?"


def extraction(entities: list[tuple[str, str, str]], relations: list[tuple[int, str, int, str]]) -> str:
    """Render records in the bracketed grammar. Relation endpoints are 1-based entity positions."""
    lines = [f'[entity | E{i} | {t} | "{n}" | {d}]' for i, (t, n, d) in enumerate(entities, start=1)]
    lines += [f'[relation | E{h} | {p} | E{t} | "{ev}"]' for h, p, t, ev in relations]
    return "\n".join(lines)


def answer(steps: list[str], final: str) -> str:
    body = "\n".join(f"{i}. {s}" for i, s in enumerate(steps, start=1))
    return f"Reasoning Steps:\n{body}\nFinal Answer: {final}"


# -- demo corpus -------------------------------------------------------------

DEMO_DOCS = [
    (
        "inception",
        "Inception",
        "Inception is a 2010 science fiction film written and directed by Christopher Nolan. "
        "Leonardo DiCaprio stars as Dom Cobb, a thief who steals secrets from dreams. "
        "The film was produced by Emma Thomas.",
        extraction(
            [
                ("Film", "Inception", "2010 science fiction film"),
                ("Person", "Christopher Nolan", "Writer and director of Inception"),
                ("Person", "Leonardo DiCaprio", "Actor who plays Dom Cobb"),
                ("Person", "Emma Thomas", "Producer of Inception"),
            ],
            [
                (1, "directed by", 2, "written and directed by Christopher Nolan"),
                (3, "stars in", 1, "Leonardo DiCaprio stars as Dom Cobb"),
                (1, "produced by", 4, "The film was produced by Emma Thomas."),
            ],
        ),
    ),
    (
        "nolan",
        "Christopher Nolan",
        "Christopher Nolan is a British-American filmmaker. "
        "Nolan was born in London, England, on 30 July 1970. "
        "He is married to the producer Emma Thomas.",
        # The birthplace is deliberately missing so the loop has something to recover.
        extraction(
            [
                ("Person", "Christopher Nolan", "British-American filmmaker"),
                ("Person", "Emma Thomas", "Film producer"),
            ],
            [(1, "married to", 2, "He is married to the producer Emma Thomas.")],
        ),
    ),
    (
        "interstellar",
        "Interstellar",
        "Interstellar is a 2014 film directed by Christopher Nolan. "
        "Matthew McConaughey plays the astronaut Cooper. "
        "The story features a wormhole near Saturn.",
        extraction(
            [
                ("Film", "Interstellar", "2014 science fiction film"),
                ("Person", "Christopher Nolan", "Director of Interstellar"),
                ("Person", "Matthew McConaughey", "Actor who plays Cooper"),
                ("Celestial Body", "Saturn", "Planet near the wormhole"),
            ],
            [
                (1, "directed by", 2, "Interstellar is a 2014 film directed by Christopher Nolan."),
                (3, "stars in", 1, "Matthew McConaughey plays the astronaut Cooper."),
                (1, "features wormhole near", 4, "The story features a wormhole near Saturn."),
            ],
        ),
    ),
    (
        "marie-curie",
        "Marie Curie",
        "Marie Curie was a physicist and chemist who conducted pioneering research on radioactivity. "
        "She was born in Warsaw in 1867. "
        "Marie Curie shared the 1903 Nobel Prize in Physics with Pierre Curie.",
        extraction(
            [
                ("Person", "Marie Curie", "Physicist and chemist"),
                ("City", "Warsaw", "Birthplace of Marie Curie"),
                ("Person", "Pierre Curie", "Physicist"),
            ],
            [
                (1, "born in", 2, "She was born in Warsaw in 1867."),
                (1, "shared Nobel Prize with", 3, "shared the 1903 Nobel Prize in Physics with Pierre Curie"),
            ],
        ),
    ),
    (
        "pierre-curie",
        "Pierre Curie",
        "Pierre Curie was a French physicist. "
        "He was born in Paris in 1859. "
        "Pierre Curie married Marie Curie in 1895.",
        extraction(
            [
                ("Person", "Pierre Curie", "French physicist"),
                ("City", "Paris", "Birthplace of Pierre Curie"),
                ("Person", "Marie Curie", "Physicist and chemist"),
            ],
            [
                (1, "born in", 2, "He was born in Paris in 1859."),
                (1, "married", 3, "Pierre Curie married Marie Curie in 1895."),
            ],
        ),
    ),
]

DEMO_RULES = [
    Rule("triples_extraction", [resp], (text.split(". ")[0],)) for _, _, text, resp in DEMO_DOCS
] + [
    Rule(
        "reasoning",
        [
            answer(
                ["Inception was directed by Christopher Nolan.", "The triples do not state where Nolan was born."],
                "Unknown",
            ),
            answer(
                ["Inception was directed by Christopher Nolan.", "Christopher Nolan was born in London."],
                "London",
            ),
        ],
        (DEMO_QUESTION,),
    ),
    Rule("missing_knowledge", ["Where was Christopher Nolan born?", "None"], (DEMO_QUESTION,)),
    Rule(
        "kg_enrichment",
        [
            extraction(
                [("Person", "Christopher Nolan", "British-American filmmaker"), ("City", "London", "Capital of England")],
                [(1, "born in", 2, "Nolan was born in London, England, on 30 July 1970.")],
            )
        ],
        ("Where was Christopher Nolan born?",),
    ),
]


# -- QA benchmark ------------------------------------------------------------

# (question, golds, [(title, text, extraction)], round answers, sub-question rounds, enrichment)
QA_ITEMS = [
    (
        "Which country is the Eiffel Tower located in?",
        ["France"],
        [
            ("Eiffel Tower", "The Eiffel Tower is a wrought-iron tower on the Champ de Mars in Paris.",
             extraction([("Landmark", "Eiffel Tower", "Wrought-iron tower"), ("City", "Paris", "City")],
                        [(1, "located in", 2, "The Eiffel Tower is a wrought-iron tower on the Champ de Mars in Paris.")])),
            ("Paris", "Paris is the capital and largest city of France.",
             extraction([("City", "Paris", "Capital of France"), ("Country", "France", "Country")],
                        [(1, "capital of", 2, "Paris is the capital and largest city of France.")])),
        ],
        ["France"],
    ),
    (
        "Who wrote the novel that the film Blade Runner is based on?",
        ["Philip K. Dick"],
        [
            ("Blade Runner", "Blade Runner is a 1982 film based on the novel Do Androids Dream of Electric Sheep?",
             extraction([("Film", "Blade Runner", "1982 film"), ("Novel", "Do Androids Dream of Electric Sheep?", "Novel")],
                        [(1, "based on", 2, "Blade Runner is a 1982 film based on the novel Do Androids Dream of Electric Sheep?")])),
            ("Do Androids Dream of Electric Sheep?", "Do Androids Dream of Electric Sheep? is a 1968 novel by Philip K. Dick.",
             extraction([("Novel", "Do Androids Dream of Electric Sheep?", "1968 novel"), ("Person", "Philip K. Dick", "Writer")],
                        [(1, "written by", 2, "Do Androids Dream of Electric Sheep? is a 1968 novel by Philip K. Dick.")])),
        ],
        ["Philip K. Dick"],
    ),
    (
        "What river flows through the capital of Hungary?",
        ["Danube", "the Danube River"],
        [
            ("Budapest", "Budapest is the capital of Hungary.",
             extraction([("City", "Budapest", "Capital city"), ("Country", "Hungary", "Country")],
                        [(1, "capital of", 2, "Budapest is the capital of Hungary.")])),
            ("Danube", "The Danube flows through Budapest on its way to the Black Sea.",
             extraction([("River", "Danube", "European river"), ("City", "Budapest", "City")],
                        [(1, "flows through", 2, "The Danube flows through Budapest on its way to the Black Sea.")])),
        ],
        ["The Danube"],
    ),
    (
        "In what year was the founder of Microsoft born?",
        ["1955"],
        [
            ("Microsoft", "Microsoft was founded by Bill Gates and Paul Allen in 1975.",
             extraction([("Company", "Microsoft", "Software company"), ("Person", "Bill Gates", "Co-founder")],
                        [(1, "founded by", 2, "Microsoft was founded by Bill Gates and Paul Allen in 1975.")])),
            ("Bill Gates", "Bill Gates was born on 28 October 1955 in Seattle.",
             extraction([("Person", "Bill Gates", "Businessman"), ("Year", "1955", "Birth year")],
                        [(1, "born in year", 2, "Bill Gates was born on 28 October 1955 in Seattle.")])),
        ],
        ["1955"],
    ),
    (
        "Which instrument did the composer of The Four Seasons play?",
        ["violin"],
        [
            ("The Four Seasons", "The Four Seasons is a set of violin concertos composed by Antonio Vivaldi.",
             extraction([("Musical Work", "The Four Seasons", "Set of concertos"), ("Person", "Antonio Vivaldi", "Composer")],
                        [(1, "composed by", 2, "The Four Seasons is a set of violin concertos composed by Antonio Vivaldi.")])),
            ("Antonio Vivaldi", "Antonio Vivaldi was a Venetian composer and virtuoso violinist.",
             extraction([("Person", "Antonio Vivaldi", "Venetian composer"), ("Instrument", "violin", "String instrument")],
                        [(1, "played", 2, "Antonio Vivaldi was a Venetian composer and virtuoso violinist.")])),
        ],
        ["The violin"],
    ),
    (
        "What is the nationality of the director of Parasite?",
        ["South Korean"],
        [
            ("Parasite", "Parasite is a 2019 film directed by Bong Joon-ho.",
             extraction([("Film", "Parasite", "2019 film"), ("Person", "Bong Joon-ho", "Director")],
                        [(1, "directed by", 2, "Parasite is a 2019 film directed by Bong Joon-ho.")])),
            ("Bong Joon-ho", "Bong Joon-ho is a South Korean filmmaker.",
             extraction([("Person", "Bong Joon-ho", "Filmmaker"), ("Nationality", "South Korean", "Nationality")],
                        [(1, "nationality", 2, "Bong Joon-ho is a South Korean filmmaker.")])),
        ],
        ["South Korean"],
    ),
    (
        "Which university did the author of A Brief History of Time work at?",
        ["University of Cambridge"],
        [
            ("A Brief History of Time", "A Brief History of Time is a 1988 book by Stephen Hawking.",
             extraction([("Book", "A Brief History of Time", "1988 book"), ("Person", "Stephen Hawking", "Physicist")],
                        [(1, "written by", 2, "A Brief History of Time is a 1988 book by Stephen Hawking.")])),
            ("Stephen Hawking", "Stephen Hawking was a physicist at the University of Cambridge.",
             extraction([("Person", "Stephen Hawking", "Physicist"), ("University", "University of Cambridge", "University")],
                        [(1, "worked at", 2, "Stephen Hawking was a physicist at the University of Cambridge.")])),
        ],
        ["Cambridge"],
    ),
    (
        "Which element did Marie Curie name after her home country?",
        ["polonium"],
        [
            ("Polonium", "Polonium was discovered in 1898 by Marie Curie and Pierre Curie.",
             extraction([("Chemical Element", "Polonium", "Radioactive element"), ("Person", "Marie Curie", "Chemist")],
                        [(1, "discovered by", 2, "Polonium was discovered in 1898 by Marie Curie and Pierre Curie.")])),
            ("Marie Curie", "Marie Curie named polonium after Poland, her native country.",
             extraction([("Person", "Marie Curie", "Chemist"), ("Country", "Poland", "Native country")],
                        [(1, "native country", 2, "Marie Curie named polonium after Poland, her native country.")])),
        ],
        ["Polonium and radium"],
    ),
    (
        "Who painted the ceiling of the chapel in Vatican City?",
        ["Michelangelo"],
        [
            ("Sistine Chapel", "The Sistine Chapel is a chapel in Vatican City.",
             extraction([("Building", "Sistine Chapel", "Chapel"), ("Country", "Vatican City", "City-state")],
                        [(1, "located in", 2, "The Sistine Chapel is a chapel in Vatican City.")])),
            ("Michelangelo", "Michelangelo painted the Sistine Chapel ceiling between 1508 and 1512.",
             extraction([("Person", "Michelangelo", "Renaissance artist")], [])),
        ],
        ["Raphael", "Michelangelo"],
        "Who painted the Sistine Chapel ceiling?",
        extraction(
            [("Person", "Michelangelo", "Renaissance artist"), ("Building", "Sistine Chapel", "Chapel")],
            [(1, "painted ceiling of", 2, "Michelangelo painted the Sistine Chapel ceiling between 1508 and 1512.")],
        ),
    ),
    (
        "In which ocean is the island nation whose capital is Malé?",
        ["Indian Ocean"],
        [
            ("Malé", "Malé is the capital of the Maldives.",
             extraction([("City", "Malé", "Capital city"), ("Country", "Maldives", "Island nation")],
                        [(1, "capital of", 2, "Malé is the capital of the Maldives.")])),
            ("Maldives", "The Maldives is an island nation in the Indian Ocean.",
             extraction([("Country", "Maldives", "Island nation"), ("Ocean", "Indian Ocean", "Ocean")],
                        [(1, "located in", 2, "The Maldives is an island nation in the Indian Ocean.")])),
        ],
        ["Indian Ocean"],
    ),
]


def qa_rules() -> list[Rule]:
    rules: list[Rule] = []
    for item in QA_ITEMS:
        question, _, contexts, answers = item[:4]
        for _, text, resp in contexts:
            rules.append(Rule("triples_extraction", [resp], (text,)))
        rules.append(Rule("reasoning", [answer([f"Considering the triples about: {question}"], a) for a in answers], (question,)))
        if len(item) > 4:
            subq, enrichment = item[4], item[5]
            rules.append(Rule("missing_knowledge", [subq, "None"], (question,)))
            rules.append(Rule("kg_enrichment", [enrichment], (subq,)))
        else:
            rules.append(Rule("missing_knowledge", ["None"], (question,)))
    return rules


def write_jsonl(path: Path, records: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "demo"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    write_jsonl(out / "corpus.jsonl", [{"id": d, "title": t, "text": x} for d, t, x, _ in DEMO_DOCS])
    replay = out / "replay.jsonl"
    replay.unlink(missing_ok=True)
    gw = Gateway(RecordingTransport(ScriptedTransport(DEMO_RULES), replay), MockEmbedder(), EmbeddingCache())
    corpus = Corpus([Document(d, t, x) for d, t, x, _ in DEMO_DOCS])
    g, report = build_graph(corpus, gw, KnowledgeGraph())
    assert report.failed_chunks == 0, report
    result = run_query(DEMO_QUESTION, g, corpus, gw, LoopConfig())
    rounds = [t.answer.final_answer for t in result.traces]
    assert rounds == ["Unknown", "London"], rounds
    print(f"demo: {report.to_dict()} rounds={rounds} graph={g.snapshot_stats()}")

    qa_records = [
        {
            "id": f"demo-{n:02d}",
            "question": item[0],
            "answers": item[1],
            "contexts": [{"title": t, "text": x} for t, x, _ in item[2]],
        }
        for n, item in enumerate(QA_ITEMS)
    ]
    write_jsonl(out / "qa.jsonl", qa_records)
    qa_replay = out / "qa_replay.jsonl"
    qa_replay.unlink(missing_ok=True)
    dataset = load_dataset(out / "qa.jsonl")
    gw = Gateway(RecordingTransport(ScriptedTransport(qa_rules()), qa_replay), MockEmbedder(), EmbeddingCache())
    qa_report, traces = run_benchmark(dataset, gw, EngineConfig(), None, 0)
    assert not any(e.error for e in qa_report.examples), [e.error for e in qa_report.examples]
    print(f"qa: EM {qa_report.em:.2f} F1 {qa_report.f1:.4f} rounds={[len(t) for t in traces.values()]}")


if __name__ == "__main__":
    main()
