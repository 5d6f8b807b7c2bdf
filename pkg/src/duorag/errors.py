"""Exception types shared across the package."""

from __future__ import annotations


class DuoragError(Exception):
    """Base class for all package errors."""


class MalformedRecordError(DuoragError):
    """A raw QA record is missing required fields."""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"malformed record at index {index}: {reason}")


class ChunkPolicyError(DuoragError):
    """Invalid chunking parameters."""


class IndexBuildError(DuoragError):
    """Embedding or index construction failed for a specific chunk."""

    def __init__(self, chunk_id: str, reason: str):
        self.chunk_id = chunk_id
        self.reason = reason
        super().__init__(f"index build failed on chunk {chunk_id}: {reason}")


class RetrievalError(DuoragError):
    """Reranking failed mid-flight; no partial result is returned."""


class PromptError(DuoragError):
    """Template lookup or rendering failed."""


class GatewayError(DuoragError):
    """Base class for model-gateway failures."""


class TransportError(GatewayError):
    """Connection-level or retryable server failure."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        self.attempts = attempts or []
        super().__init__(message)


class GatewayTimeoutError(GatewayError):
    """The call exceeded its deadline."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        self.attempts = attempts or []
        super().__init__(message)


class UnscriptedCallError(GatewayError):
    """The mock backend saw a key it has no response for. Never retried."""


class MappingError(DuoragError):
    """A retrieved chunk references a paragraph the corpus does not hold."""


class StageError(DuoragError):
    """A pipeline stage failed; carries the stage label for diagnostics."""

    def __init__(self, stage: str, reason: str):
        self.stage = stage
        self.reason = reason
        super().__init__(f"stage {stage!r} failed: {reason}")


class EmptyCotError(StageError):
    """The guidance model returned an empty chain of thought."""

    def __init__(self, reason: str = "empty chain of thought"):
        super().__init__("cot_guidance", reason)


class ConfigError(DuoragError):
    """Bad configuration file or flag combination."""
