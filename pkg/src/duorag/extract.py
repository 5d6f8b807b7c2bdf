"""Chunk-to-paragraph mapping and global information extraction.

Retrieved chunks are mapped back to their source paragraphs (duplicates
collapse to the best-scoring chunk per paragraph), and the full paragraph
texts feed one extraction call that pulls out the globally relevant
information for the question.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus
from .errors import GatewayError, MappingError, StageError
from .gateway import LlmCall, LlmGateway
from .prompts import EXTRACTOR
from .retrieval import RetrievalResult

PARAGRAPH_JOIN = "\n\n"


@dataclass(frozen=True)
class MappedContext:
    paragraphs: tuple[str, ...]  # paragraph ids, ordered
    origin: dict[str, tuple[str, float]]  # paragraph id -> (chunk id, score)

    def texts(self, corpus: Corpus) -> list[str]:
        return [corpus[pid].text for pid in self.paragraphs]


def map_chunks(
    result: RetrievalResult,
    corpus: Corpus,
    use_score: str = "fine",
    order: str = "rank",
) -> MappedContext:
    """Collapse hits onto their parent paragraphs.

    Each paragraph keeps its best chunk (highest score, then lowest seq);
    paragraphs are ordered by that representative's rank in the hit list,
    or by corpus position with order="corpus". Never yields more
    paragraphs than hits.
    """
    if use_score not in ("fine", "coarse"):
        raise ValueError("use_score must be 'fine' or 'coarse'")
    if order not in ("rank", "corpus"):
        raise ValueError("order must be 'rank' or 'corpus'")

    best: dict[str, tuple[float, int, int, str]] = {}  # pid -> (score, -seq, -rank, chunk id)
    for rank, hit in enumerate(result.hits):
        parent_id = hit.chunk.parent_id
        if parent_id not in corpus:
            raise MappingError(
                f"chunk {hit.chunk.id} references unknown paragraph {parent_id}"
            )
        score = hit.fine_score if use_score == "fine" else hit.coarse_score
        candidate = (score, -hit.chunk.seq, -rank, hit.chunk.id)
        if parent_id not in best or candidate[:2] > best[parent_id][:2]:
            best[parent_id] = candidate

    ordered = sorted(best, key=lambda pid: -best[pid][2])  # representative rank asc
    if order == "corpus":
        positions = {p.id: i for i, p in enumerate(corpus)}
        ordered.sort(key=lambda pid: positions[pid])

    origin = {pid: (best[pid][3], best[pid][0]) for pid in ordered}
    return MappedContext(paragraphs=tuple(ordered), origin=origin)


@dataclass(frozen=True)
class GlobalInfo:
    text: str  # verbatim model response, untrimmed
    source_call: LlmCall


def extract_global(
    question: str,
    mapped: MappedContext,
    corpus: Corpus,
    gateway: LlmGateway,
) -> GlobalInfo:
    """One extraction call over the mapped paragraphs, joined by blank lines."""
    if not mapped.paragraphs:
        raise ValueError("mapped context has no paragraphs")
    content = PARAGRAPH_JOIN.join(mapped.texts(corpus))
    try:
        call = gateway.call(EXTRACTOR, {"content": content, "question": question})
    except GatewayError as exc:
        raise StageError("extractor", str(exc)) from exc
    if not call.response.strip():
        raise StageError("extractor", "model returned empty global information")
    return GlobalInfo(text=call.response, source_call=call)
