"""Configuration file loading and component factories.

Config files are JSON. Every section has working offline defaults: the
hash embedder, the hash pair scorer, and a mock gateway. Remote backends
need a base URL and model name; API keys come from the environment, never
from the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .chunking import ChunkPolicy
from .errors import ChunkPolicyError, ConfigError
from .gateway import (
    Backend,
    DryRunBackend,
    HttpChatBackend,
    LlmGateway,
    MockBackend,
    load_mock_script_path,
)
from .pipeline import PipelineOptions
from .retrieval import (
    Embedder,
    EmbeddingPairScorer,
    HashEmbedder,
    HashPairScorer,
    PairScorer,
    RemoteEmbedder,
)

GATEWAY_BACKENDS = ("mock", "http", "dry-run")
EMBEDDER_BACKENDS = ("hash", "remote")
RERANKER_BACKENDS = ("hash", "embedding", "remote")


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout: float = 120.0

    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "") if self.api_key_env else ""


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "mock"
    mock_script: str = ""
    remote: RemoteConfig = RemoteConfig()
    retries: int = 3
    backoff: float = 0.5


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = "hash"
    dimension: int = 64
    remote: RemoteConfig = RemoteConfig()


@dataclass(frozen=True)
class RerankerConfig:
    backend: str = "hash"
    remote: RemoteConfig = RemoteConfig()
    dimension: int = 64


@dataclass(frozen=True)
class AppConfig:
    corpus: str = ""
    qa: str = ""
    chunk_size: int = 200
    overlap_sentences: int = 1
    min_tail_words: int | None = None
    top_k: int = 7
    coarse_n: int = 0
    gateway: GatewayConfig = GatewayConfig()
    embedder: EmbedderConfig = EmbedderConfig()
    reranker: RerankerConfig = RerankerConfig()
    pipeline: PipelineOptions = PipelineOptions()
    seed: int = 0

    def chunk_policy(self, chunk_size: int | None = None) -> ChunkPolicy:
        try:
            return ChunkPolicy(
                chunk_size=chunk_size or self.chunk_size,
                overlap_sentences=self.overlap_sentences,
                min_tail_words=self.min_tail_words,
            )
        except ChunkPolicyError as exc:
            raise ConfigError(str(exc)) from exc


def _remote_from(obj: dict) -> RemoteConfig:
    return RemoteConfig(
        base_url=obj.get("base_url", ""),
        model=obj.get("model", ""),
        api_key_env=obj.get("api_key_env", ""),
        timeout=float(obj.get("timeout", 120.0)),
    )


def config_from_dict(obj: dict, base_dir: Path | None = None) -> AppConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be an object")

    def resolve(path: str) -> str:
        if not path or base_dir is None:
            return path
        candidate = Path(path)
        return str(candidate if candidate.is_absolute() else base_dir / candidate)

    chunk = obj.get("chunk", {})
    retrieval = obj.get("retrieval", {})
    gateway_obj = obj.get("gateway", {})
    embedder_obj = obj.get("embedder", {})
    reranker_obj = obj.get("reranker", {})
    pipeline_obj = obj.get("pipeline", {})

    gateway = GatewayConfig(
        backend=gateway_obj.get("backend", "mock"),
        mock_script=resolve(gateway_obj.get("mock_script", "")),
        remote=_remote_from(gateway_obj),
        retries=int(gateway_obj.get("retries", 3)),
        backoff=float(gateway_obj.get("backoff", 0.5)),
    )
    if gateway.backend not in GATEWAY_BACKENDS:
        raise ConfigError(f"gateway.backend must be one of {GATEWAY_BACKENDS}")
    if gateway.backend == "http" and gateway.mock_script:
        raise ConfigError("gateway.mock_script conflicts with the http backend")
    if gateway.backend == "http" and not (gateway.remote.base_url and gateway.remote.model):
        raise ConfigError("http gateway needs base_url and model")

    embedder = EmbedderConfig(
        backend=embedder_obj.get("backend", "hash"),
        dimension=int(embedder_obj.get("dimension", 64)),
        remote=_remote_from(embedder_obj),
    )
    if embedder.backend not in EMBEDDER_BACKENDS:
        raise ConfigError(f"embedder.backend must be one of {EMBEDDER_BACKENDS}")
    if embedder.backend == "remote" and not (embedder.remote.base_url and embedder.remote.model):
        raise ConfigError("remote embedder needs base_url and model")

    reranker = RerankerConfig(
        backend=reranker_obj.get("backend", "hash"),
        remote=_remote_from(reranker_obj),
        dimension=int(reranker_obj.get("dimension", embedder.dimension)),
    )
    if reranker.backend not in RERANKER_BACKENDS:
        raise ConfigError(f"reranker.backend must be one of {RERANKER_BACKENDS}")
    if reranker.backend == "remote" and not (reranker.remote.base_url and reranker.remote.model):
        raise ConfigError("remote reranker needs base_url and model")

    try:
        pipeline = PipelineOptions(
            passage_headers=bool(pipeline_obj.get("passage_headers", False)),
            ig_first_for_ext=bool(pipeline_obj.get("ig_first_for_ext", False)),
            mapping_use_score=pipeline_obj.get("mapping_use_score", "fine"),
            mapping_order=pipeline_obj.get("mapping_order", "rank"),
            on_empty_cot=pipeline_obj.get("on_empty_cot", "error"),
            filter_workers=int(pipeline_obj.get("filter_workers", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    min_tail = chunk.get("min_tail_words")
    config = AppConfig(
        corpus=resolve(obj.get("corpus", "")),
        qa=resolve(obj.get("qa", "")),
        chunk_size=int(chunk.get("chunk_size", 200)),
        overlap_sentences=int(chunk.get("overlap_sentences", 1)),
        min_tail_words=int(min_tail) if min_tail is not None else None,
        top_k=int(retrieval.get("top_k", 7)),
        coarse_n=int(retrieval.get("coarse_n", 0)),
        gateway=gateway,
        embedder=embedder,
        reranker=reranker,
        pipeline=pipeline,
        seed=int(obj.get("seed", 0)),
    )
    config.chunk_policy()  # validate early
    if config.top_k <= 0:
        raise ConfigError("retrieval.top_k must be positive")
    if config.coarse_n < 0:
        raise ConfigError("retrieval.coarse_n must be >= 0")
    return config


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(obj, base_dir=path.parent)


def make_embedder(config: AppConfig) -> Embedder:
    if config.embedder.backend == "hash":
        return HashEmbedder(config.embedder.dimension)
    remote = config.embedder.remote
    return RemoteEmbedder(
        base_url=remote.base_url,
        model=remote.model,
        dimension=config.embedder.dimension,
        api_key=remote.api_key(),
        timeout=remote.timeout,
    )


def make_pair_scorer(config: AppConfig, embedder: Embedder) -> PairScorer:
    if config.reranker.backend == "hash":
        return HashPairScorer()
    if config.reranker.backend == "embedding":
        return EmbeddingPairScorer(embedder)
    remote = config.reranker.remote
    return EmbeddingPairScorer(
        RemoteEmbedder(
            base_url=remote.base_url,
            model=remote.model,
            dimension=config.reranker.dimension,
            api_key=remote.api_key(),
            timeout=remote.timeout,
        )
    )


def make_gateway(
    config: AppConfig,
    mock_script: str | None = None,
    dry_run: bool = False,
) -> LlmGateway:
    """Build the gateway; --mock-script and --dry-run flags override the file."""
    backend: Backend
    if dry_run:
        backend = DryRunBackend()
    elif mock_script:
        backend = load_mock_script_path(mock_script)
    elif config.gateway.backend == "mock":
        if not config.gateway.mock_script:
            raise ConfigError("mock gateway needs a mock_script (file or --mock-script)")
        backend = load_mock_script_path(config.gateway.mock_script)
    elif config.gateway.backend == "dry-run":
        backend = DryRunBackend()
    else:
        remote = config.gateway.remote
        backend = HttpChatBackend(
            base_url=remote.base_url,
            model=remote.model,
            api_key=remote.api_key(),
            timeout=remote.timeout,
        )
    return LlmGateway(backend, retries=config.gateway.retries, backoff=config.gateway.backoff)
