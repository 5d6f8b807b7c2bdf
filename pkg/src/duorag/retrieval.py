"""Two-stage retrieval: exact cosine search, then pairwise reranking.

The coarse stage embeds chunks into unit vectors and scores queries by
brute-force cosine (exact, no ANN). The fine stage rescores the coarse
candidates with a pairwise question/passage scorer and keeps the top k.
Deterministic mock scorers derive vectors and scores from content hashes
so offline runs are reproducible to the byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import httpx
import numpy as np

from .chunking import Chunk
from .errors import IndexBuildError, RetrievalError, TransportError


class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class PairScorer(Protocol):
    def score(self, question: str, passage: str) -> float: ...


def _hash_seed(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


class HashEmbedder:
    """Deterministic mock embedder: unit vector seeded by the text hash."""

    def __init__(self, dimension: int = 64):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            rng = np.random.default_rng(_hash_seed(text))
            vec = rng.standard_normal(self.dimension)
            norm = np.linalg.norm(vec)
            out.append(vec / norm if norm > 0 else vec)
        return out


class HashPairScorer:
    """Deterministic mock reranker: uniform score from the pair hash."""

    def score(self, question: str, passage: str) -> float:
        digest = hashlib.sha256((question + "\x1f" + passage).encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2.0**64


class RemoteEmbedder:
    """OpenAI-compatible /embeddings client."""

    def __init__(
        self,
        base_url: str,
        model: str,
        dimension: int,
        api_key: str = "",
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self.model = model
        self.dimension = dimension
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            response = self._client.post(
                "/embeddings", json={"model": self.model, "input": list(texts)}
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding transport failure: {exc}") from exc
        if response.status_code >= 400:
            raise TransportError(f"embedding endpoint returned {response.status_code}")
        try:
            rows = response.json()["data"]
            vectors = [np.asarray(row["embedding"], dtype=np.float64) for row in rows]
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise TransportError(f"embedding count mismatch: {len(vectors)} != {len(texts)}")
        for vec in vectors:
            if vec.shape != (self.dimension,):
                raise TransportError(
                    f"embedding has shape {vec.shape}, expected ({self.dimension},)"
                )
        return vectors

    def close(self) -> None:
        self._client.close()


class EmbeddingPairScorer:
    """Rerank by embedding cosine. With the index embedder this makes the
    fine stage a passthrough of the coarse ordering."""

    def __init__(self, embedder: Embedder):
        self.embedder = embedder

    def score(self, question: str, passage: str) -> float:
        q, p = self.embedder.embed([question, passage])
        qn = np.linalg.norm(q)
        pn = np.linalg.norm(p)
        if qn == 0 or pn == 0:
            return 0.0
        return float(np.dot(q, p) / (qn * pn))


class VectorIndex:
    """Exact cosine index over chunk embeddings."""

    def __init__(self, chunks: list[Chunk], matrix: np.ndarray, embedder: Embedder):
        self.chunks = chunks
        self.matrix = matrix
        self.embedder = embedder

    def __len__(self) -> int:
        return len(self.chunks)

    def search(self, question: str, n: int) -> list[tuple[Chunk, float]]:
        if n <= 0:
            raise ValueError("n must be positive")
        query = self.embedder.embed([question])[0]
        norm = np.linalg.norm(query)
        if norm > 0:
            query = query / norm
        scores = self.matrix @ query
        order = sorted(range(len(self.chunks)), key=lambda i: (-scores[i], self.chunks[i].id))
        return [(self.chunks[i], float(scores[i])) for i in order[: min(n, len(self.chunks))]]


def build_index(chunks: Iterable[Chunk], embedder: Embedder) -> VectorIndex:
    """Embed chunks into a unit-row matrix. Fails naming the bad chunk."""
    chunk_list = list(chunks)
    if not chunk_list:
        raise ValueError("cannot index zero chunks")
    seen: set[str] = set()
    for chunk in chunk_list:
        if chunk.id in seen:
            raise IndexBuildError(chunk.id, "duplicate chunk id")
        seen.add(chunk.id)

    rows = []
    for chunk in chunk_list:
        try:
            vec = embedder.embed([chunk.text])[0]
        except Exception as exc:
            raise IndexBuildError(chunk.id, f"embedding failed: {exc}") from exc
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (embedder.dimension,):
            raise IndexBuildError(
                chunk.id, f"embedding has shape {vec.shape}, expected ({embedder.dimension},)"
            )
        norm = np.linalg.norm(vec)
        rows.append(vec / norm if norm > 0 else vec)
    return VectorIndex(chunk_list, np.vstack(rows), embedder)


@dataclass(frozen=True)
class Hit:
    chunk: Chunk
    coarse_score: float
    fine_score: float


@dataclass(frozen=True)
class RetrievalResult:
    question: str
    hits: tuple[Hit, ...]
    k: int

    def chunk_ids(self) -> list[str]:
        return [hit.chunk.id for hit in self.hits]


def retrieve(
    question: str,
    index: VectorIndex,
    pair_scorer: PairScorer,
    coarse_n: int,
    k: int,
) -> RetrievalResult:
    """Coarse cosine top-n, then rerank by pair score; keep the top k.

    Fine scores are non-increasing; ties break on chunk id. Both stage
    widths cap at the index size. A scorer failure aborts the whole call.
    """
    if coarse_n <= 0 or k <= 0:
        raise ValueError("coarse_n and k must be positive")
    if k > coarse_n:
        raise ValueError("k cannot exceed coarse_n")

    candidates = index.search(question, min(coarse_n, len(index)))

    scored: list[Hit] = []
    for chunk, coarse in candidates:
        try:
            fine = float(pair_scorer.score(question, chunk.text))
        except Exception as exc:
            raise RetrievalError(
                f"pair scorer failed on chunk {chunk.id} "
                f"({len(scored)}/{len(candidates)} scored): {exc}"
            ) from exc
        scored.append(Hit(chunk=chunk, coarse_score=coarse, fine_score=fine))

    scored.sort(key=lambda hit: (-hit.fine_score, hit.chunk.id))
    kept = tuple(scored[: min(k, len(scored))])
    return RetrievalResult(question=question, hits=kept, k=len(kept))
