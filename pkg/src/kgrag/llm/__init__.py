from kgrag.llm.embedding import EmbeddingCache, MockEmbedder, OpenAIEmbedder
from kgrag.llm.gateway import Gateway
from kgrag.llm.templates import MissingBinding, PromptTemplate, load_template, render
from kgrag.llm.transport import (
    BackendUnavailable,
    EndpointSettings,
    GatewayError,
    LiveTransport,
    ProtocolViolation,
    RecordingTransport,
    ReplayMiss,
    ReplayTransport,
    prompt_hash,
)

__all__ = [
    "BackendUnavailable",
    "EmbeddingCache",
    "EndpointSettings",
    "Gateway",
    "GatewayError",
    "LiveTransport",
    "MissingBinding",
    "MockEmbedder",
    "OpenAIEmbedder",
    "PromptTemplate",
    "ProtocolViolation",
    "RecordingTransport",
    "ReplayMiss",
    "ReplayTransport",
    "load_template",
    "prompt_hash",
    "render",
]
