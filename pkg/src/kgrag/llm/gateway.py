from __future__ import annotations

import threading
from typing import Sequence

import numpy as np

from kgrag.llm.embedding import Embedder, EmbeddingCache, MockEmbedder
from kgrag.llm.templates import load_template
from kgrag.llm.transport import Transport


class Gateway:
    """Single entry point for prompt rendering, completions and embeddings.

    Thread-safe; at most ``max_in_flight`` completions run concurrently.
    """

    def __init__(
        self,
        transport: Transport,
        embedder: Embedder | None = None,
        cache: EmbeddingCache | None = None,
        max_in_flight: int = 8,
    ):
        self.transport = transport
        self.embedder = embedder or MockEmbedder()
        self.cache = cache or EmbeddingCache()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @property
    def deterministic(self) -> bool:
        return getattr(self.transport, "deterministic", False)

    def render(self, template: str, **bindings: str) -> str:
        return load_template(template).render(bindings)

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        with self._slots:
            return self.transport.complete(prompt)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """One cached vector per text, shape ``(len(texts), dim)``."""
        return self.cache.get_many(self.embedder, list(texts))
