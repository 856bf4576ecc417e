"""Text embedders and a content-addressed embedding cache.

``MockEmbedder`` is the offline backend: a text's vector is the sum, over its
normalized token multiset, of one fixed pseudo-random Gaussian vector per
token. Texts sharing tokens therefore have positively correlated vectors and
the construction is order-free, so "a b" and "b a" embed identically.
"""

from __future__ import annotations

import hashlib
import struct
import string
import threading
import time
from collections import Counter
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from kgrag.corpus import tokenize
from kgrag.llm.transport import RETRY_DELAYS, EndpointSettings, ProtocolViolation, post_with_retry

_STRIP = string.punctuation + "“”‘’«»…"


class Embedder(Protocol):
    embedder_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def mock_tokens(text: str) -> list[str]:
    """Lowercased tokens with surrounding punctuation removed."""
    out = []
    for tok in tokenize(text):
        norm = tok.lower().strip(_STRIP)
        out.append(norm or tok.lower())
    return out


class MockEmbedder:
    """Deterministic bag-of-tokens random-projection embedder."""

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.embedder_id = f"mock-d{dim}-s{seed}"
        self._token_vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._token_vectors.get(token)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}\x00{token}".encode("utf-8"), digest_size=16).digest()
            vec = np.random.default_rng(int.from_bytes(digest, "little")).standard_normal(self.dim)
            with self._lock:
                self._token_vectors[token] = vec
        return vec

    def embed_one(self, text: str) -> np.ndarray:
        counts = Counter(mock_tokens(text)) or Counter({"": 1})
        vec = np.zeros(self.dim)
        # Sorted accumulation keeps equal multisets bit-identical.
        for token in sorted(counts):
            vec += counts[token] * self.token_vector(token)
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self.embed_one(t) for t in texts])


class OpenAIEmbedder:
    """OpenAI-compatible ``/embeddings`` client."""

    def __init__(
        self,
        settings: EndpointSettings,
        client: httpx.Client | None = None,
        batch_size: int = 128,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.settings = settings
        self.embedder_id = f"openai:{settings.embed_model}"
        self.client = client or httpx.Client(timeout=60.0)
        self.client.headers["Authorization"] = f"Bearer {settings.api_key}"
        self.batch_size = batch_size
        self.sleep = sleep
        self.dim: int | None = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows: list[list[float]] = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i : i + self.batch_size])
            data = post_with_retry(
                self.client,
                f"{self.settings.base_url}/embeddings",
                {"model": self.settings.embed_model, "input": batch},
                RETRY_DELAYS,
                self.sleep,
            )
            try:
                items = sorted(data["data"], key=lambda d: d["index"])
                vectors = [item["embedding"] for item in items]
            except (KeyError, TypeError) as exc:
                raise ProtocolViolation("unexpected embedding response shape") from exc
            if len(vectors) != len(batch):
                raise ProtocolViolation(f"asked for {len(batch)} embeddings, got {len(vectors)}")
            rows.extend(vectors)
        if not rows:
            return np.zeros((0, self.dim or 0))
        dims = {len(r) for r in rows}
        if len(dims) != 1 or (self.dim is not None and dims != {self.dim}):
            raise ProtocolViolation(f"inconsistent embedding dimensions {sorted(dims)}")
        out = np.asarray(rows, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise ProtocolViolation("non-finite embedding values")
        self.dim = out.shape[1]
        return out


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_MAGIC = b"KGEMBv1\x00"


class CacheFormatError(ValueError):
    pass


class EmbeddingCache:
    """Embeddings keyed by ``(embedder_id, sha256(text))``.

    Reads are lock-free; filling missing entries takes an exclusive lock.
    ``save``/``load`` use the binary layout in ``docs/embedding-cache.md``.
    """

    def __init__(self) -> None:
        self._store: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    def get_many(self, embedder: Embedder, texts: Sequence[str]) -> np.ndarray:
        keys = [(embedder.embedder_id, text_key(t)) for t in texts]
        missing = [i for i, k in enumerate(keys) if k not in self._store]
        if missing:
            with self._lock:
                todo = list(dict.fromkeys(texts[i] for i in missing if keys[i] not in self._store))
                if todo:
                    vectors = embedder.embed(todo)
                    for text, vec in zip(todo, vectors):
                        self._store[(embedder.embedder_id, text_key(text))] = np.asarray(vec, dtype=np.float64)
        if not texts:
            return np.zeros((0, 0))
        return np.stack([self._store[k] for k in keys])

    def get(self, embedder: Embedder, text: str) -> np.ndarray:
        return self.get_many(embedder, [text])[0]

    def save(self, path: str | Path, embedder_id: str) -> None:
        entries = [(k[1], v) for k, v in self._store.items() if k[0] == embedder_id]
        dim = len(entries[0][1]) if entries else 0
        ident = embedder_id.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<III", dim, len(entries), len(ident)))
            fh.write(ident)
            if entries:
                fh.write(np.stack([v for _, v in entries]).astype("<f8").tobytes())
            for key, _ in entries:
                raw = key.encode("ascii")
                fh.write(struct.pack("<H", len(raw)) + raw)

    def load(self, path: str | Path) -> str:
        """Merge a saved cache file into this cache; returns its embedder id."""
        data = Path(path).read_bytes()
        try:
            if data[:8] != _MAGIC:
                raise CacheFormatError("not an embedding cache file")
            dim, count, id_len = struct.unpack_from("<III", data, 8)
            pos = 20
            embedder_id = data[pos : pos + id_len].decode("utf-8")
            pos += id_len
            nbytes = dim * count * 8
            if len(data) < pos + nbytes:
                raise CacheFormatError("truncated vector block")
            matrix = np.frombuffer(data, dtype="<f8", count=dim * count, offset=pos).reshape(count, dim)
            pos += nbytes
            keys = []
            for _ in range(count):
                (n,) = struct.unpack_from("<H", data, pos)
                pos += 2
                if len(data) < pos + n:
                    raise CacheFormatError("truncated key table")
                keys.append(data[pos : pos + n].decode("ascii"))
                pos += n
        except (struct.error, UnicodeDecodeError) as exc:
            raise CacheFormatError(f"corrupt embedding cache: {exc}") from exc
        with self._lock:
            for key, row in zip(keys, matrix):
                self._store[(embedder_id, key)] = row.astype(np.float64)
        return embedder_id
