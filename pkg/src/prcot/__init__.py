"""Poly-reflective chain-of-thought: initial reasoning, perspective critiques, synthesis."""

from .backend import (
    CachedBackend,
    ChatMessage,
    CompletionRequest,
    CompletionResult,
    MockBackend,
    MockRule,
    RemoteBackend,
    ReplayBackend,
    ResponseStore,
    build_backend,
    cache_key,
    mock_usage,
)
from .core import (
    V1,
    V2,
    V3,
    V4,
    GoldLabel,
    MatchMode,
    Method,
    PerspectiveId,
    PipelineConfig,
    ReasoningArtifact,
    ReflectionCritique,
    RunTranscript,
    SamplingParams,
    TaskInstance,
    TaskKind,
    Usage,
    canonical_perspective_order,
    extract_answer,
)
from .pipeline import Pipeline
from .prompts import PromptLibrary, PromptTemplate

__version__ = "0.1.0"
