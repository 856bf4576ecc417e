"""Document ingestion, whitespace tokenization, overlapping chunking and
sentence segmentation.

Token positions are 1-based and inclusive throughout, so a chunk spanning
``start=449, end=960`` holds tokens 449 through 960 of its document.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

_TOKEN_RE = re.compile(r"\S+")

DEFAULT_MAX_LEN = 512
DEFAULT_OVERLAP = 64

# Tokens (case-insensitive) that end in "." but do not end a sentence.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.",
        "vs.", "etc.", "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.",
        "no.", "fig.", "approx.", "u.s.", "u.k.", "jan.", "feb.", "mar.",
        "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
    }
)

_TERMINAL_RE = re.compile(r"[.!?]+[\"'”’)\]]*$")


class CorpusError(ValueError):
    """Raised for unreadable or malformed corpus input."""


class ConfigurationError(ValueError):
    """Raised when chunking parameters are inconsistent."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str

    @property
    def token_count(self) -> int:
        return len(tokenize(self.text))


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    index: int
    start: int
    end: int
    text: str
    title: str = ""

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Sentence:
    chunk_id: str
    ordinal: int
    text: str


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace. Empty or blank text gives ``[]``."""
    return _TOKEN_RE.findall(text)


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character ``(start, stop)`` offsets of each token, stop exclusive."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def detokenize(text: str, start: int, end: int) -> str:
    """Return the substring of ``text`` covering tokens ``start..end`` (1-based, inclusive).

    Interior whitespace is kept verbatim, so the result is always a substring
    of ``text``.
    """
    spans = token_spans(text)
    if not spans or start > end:
        return ""
    if start < 1 or end > len(spans):
        raise IndexError(f"token range [{start}, {end}] outside 1..{len(spans)}")
    return text[spans[start - 1][0] : spans[end - 1][1]]


def chunk_bounds(length: int, max_len: int = DEFAULT_MAX_LEN, overlap: int = DEFAULT_OVERLAP) -> list[tuple[int, int]]:
    """1-based inclusive ``(start, end)`` spans for a document of ``length`` tokens.

    ``start_i = (i - 1) * (max_len - overlap) + 1`` and
    ``end_i = min(start_i + max_len - 1, length)``; emission stops at the
    first chunk that reaches the end of the document.
    """
    if max_len < 1:
        raise ConfigurationError(f"max_len must be >= 1, got {max_len}")
    if not 0 <= overlap < max_len:
        raise ConfigurationError(f"overlap must satisfy 0 <= overlap < max_len, got overlap={overlap}, max_len={max_len}")
    bounds = []
    stride = max_len - overlap
    i = 1
    while length > 0:
        s = (i - 1) * stride + 1
        e = min(s + max_len - 1, length)
        bounds.append((s, e))
        if e == length:
            break
        i += 1
    return bounds


def split_document(doc: Document, max_len: int = DEFAULT_MAX_LEN, overlap: int = DEFAULT_OVERLAP) -> list[Chunk]:
    spans = token_spans(doc.text)
    chunks = []
    for i, (s, e) in enumerate(chunk_bounds(len(spans), max_len, overlap), start=1):
        text = doc.text[spans[s - 1][0] : spans[e - 1][1]]
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{i:04d}",
                doc_id=doc.doc_id,
                index=i,
                start=s,
                end=e,
                text=text,
                title=doc.title,
            )
        )
    return chunks


def _ends_sentence(token: str, abbreviations: frozenset[str]) -> bool:
    if not _TERMINAL_RE.search(token):
        return False
    return token.lower() not in abbreviations


def split_sentences(chunk: Chunk | str, abbreviations: Iterable[str] | None = None) -> list[Sentence]:
    """Segment a chunk after tokens ending in ``.``, ``!`` or ``?``.

    A token such as ``Dr.`` whose lowercase form is in ``abbreviations`` never
    ends a sentence. Text without a terminator is a single sentence.
    """
    if isinstance(chunk, Chunk):
        chunk_id, text = chunk.chunk_id, chunk.text
    else:
        chunk_id, text = "", chunk
    abbrevs = DEFAULT_ABBREVIATIONS if abbreviations is None else frozenset(a.lower() for a in abbreviations)

    sentences: list[Sentence] = []
    sent_start = None
    for m in _TOKEN_RE.finditer(text):
        if sent_start is None:
            sent_start = m.start()
        if _ends_sentence(m.group(), abbrevs):
            sentences.append(Sentence(chunk_id, len(sentences) + 1, text[sent_start : m.end()]))
            sent_start = None
    if sent_start is not None:
        sentences.append(Sentence(chunk_id, len(sentences) + 1, text[sent_start:].rstrip()))
    return sentences


@dataclass
class Corpus:
    """Documents plus their chunks, indexed by chunk id."""

    documents: list[Document] = field(default_factory=list)
    max_len: int = DEFAULT_MAX_LEN
    overlap: int = DEFAULT_OVERLAP
    chunks: dict[str, Chunk] = field(default_factory=dict, init=False)
    _sentences: dict[str, list[Sentence]] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        seen = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise CorpusError(f"duplicate document id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            for chunk in split_document(doc, self.max_len, self.overlap):
                self.chunks[chunk.chunk_id] = chunk

    def __len__(self) -> int:
        return len(self.chunks)

    def __iter__(self) -> Iterator[Chunk]:
        return iter(self.chunks.values())

    def get(self, chunk_id: str) -> Chunk | None:
        return self.chunks.get(chunk_id)

    def sentences(self, chunk_id: str) -> list[Sentence]:
        """Sentences of a chunk, memoized. Unknown ids give ``[]``."""
        if chunk_id not in self._sentences:
            chunk = self.chunks.get(chunk_id)
            self._sentences[chunk_id] = split_sentences(chunk) if chunk and chunk.text.strip() else []
        return self._sentences[chunk_id]


def parse_documents(lines: Iterable[str]) -> list[Document]:
    docs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise CorpusError(f"line {lineno}: expected an object with a string 'text' field")
        doc_id = obj.get("id", f"doc{lineno}")
        docs.append(Document(doc_id=str(doc_id), title=str(obj.get("title", "")), text=obj["text"]))
    return docs


def load_corpus(path: str | Path, max_len: int = DEFAULT_MAX_LEN, overlap: int = DEFAULT_OVERLAP) -> Corpus:
    """Read a JSON Lines corpus of ``{"id", "title", "text"}`` objects."""
    try:
        with open(path, encoding="utf-8") as fh:
            docs = parse_documents(fh)
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CorpusError(f"corpus {path} is not valid UTF-8") from exc
    return Corpus(docs, max_len=max_len, overlap=overlap)
