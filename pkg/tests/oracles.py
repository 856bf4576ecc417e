"""Independent reference implementations used to cross-check the package.

Each oracle is deliberately naive (brute force, pure Python) and shares no
code with the implementation it checks beyond the data types.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache


def chunk_oracle(length: int, max_len: int, overlap: int) -> list[tuple[int, int]]:
    """Slide a window over token positions until the last token is covered."""
    spans = []
    pos = 1
    while length > 0:
        window = list(range(pos, min(pos + max_len, length + 1)))
        spans.append((window[0], window[-1]))
        if window[-1] == length:
            break
        pos = window[-1] - overlap + 1
    return spans


def scalar_cosine(u, v) -> float:
    dot = math.fsum(float(a) * float(b) for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(float(a) * float(a) for a in u))
    nv = math.sqrt(math.fsum(float(b) * float(b) for b in v))
    return dot / (nu * nv)


def levenshtein_oracle(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def exhaustive_paths(g, seeds, scorer, query: str, max_depth: int):
    """Every relation walk from each seed that either has ``max_depth`` steps or
    cannot be extended, scored individually; sorted like the beam output."""
    found = []

    def walk(seed, node, rids):
        nexts = [r for r in g.incident_relations(node) if r.relation_id not in rids]
        if rids and (len(rids) == max_depth or not nexts):
            found.append((seed, tuple(rids)))
            return
        for r in nexts:
            other = r.tail if r.head == node else r.head
            walk(seed, other, rids + [r.relation_id])

    for s in dict.fromkeys(seeds):
        if s in g.entities:
            walk(s, s, [])
    scored = []
    for seed, rids in found:
        (score,) = scorer.score(g, query, [[g.relations[r] for r in rids]])
        scored.append((seed, rids, score))
    scored.sort(key=lambda x: (-x[2], x[1], x[0]))
    return scored


_WORD = re.compile(r"\S+")


def best_sentence_oracle(g, corpus, head: str, tail: str, template: str, embed):
    """Scan every chunk of the corpus; keep sentences from chunks either entity cites."""
    cited = g.entities[head].sources | g.entities[tail].sources
    candidates = []
    for chunk_id in sorted(corpus.chunks):
        if chunk_id in cited:
            for sent in corpus.sentences(chunk_id):
                candidates.append(sent)
    if not candidates:
        return None
    t = embed(template)
    best = None
    for sent in candidates:
        sim = scalar_cosine(t, embed(sent.text))
        key = (-sim, sent.chunk_id, sent.ordinal)
        if best is None or key < best[0]:
            best = (key, sent, sim)
    return best[1], best[2]
