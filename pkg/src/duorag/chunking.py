"""Sentence-granular chunking with greedy word-budget packing.

Paragraphs are split into sentences, sentences are packed greedily into
chunks of at most `chunk_size` words, a short final chunk is merged into
its predecessor, and consecutive chunks share `overlap_sentences` trailing
sentences. Overlap sentences do not count against the packing budget. A
single sentence longer than the budget is kept whole and flagged, as is a
tail-merged chunk that ends up over budget.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import IO, Iterable

from .corpus import Corpus, Paragraph
from .errors import ChunkPolicyError

_BOUNDARY = re.compile(r"[.!?;]\s+")

# Trailing tokens that end with "." but do not end a sentence.
_ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "rev.", "gen.", "sen.", "rep.",
        "st.", "sr.", "jr.", "etc.", "e.g.", "i.e.", "vs.", "cf.", "al.",
        "fig.", "no.", "vol.", "inc.", "ltd.", "co.", "corp.", "approx.",
        "u.s.", "u.k.", "a.m.", "p.m.",
    }
)


def _ends_with_abbreviation(fragment: str) -> bool:
    tokens = fragment.split()
    if not tokens:
        return False
    return tokens[-1].lower() in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split on [.!?;] followed by whitespace, guarding known abbreviations.

    Sentences come back in order as exact substrings of the input (ends
    trimmed); whitespace-only input yields [].
    """
    if not text.strip():
        return []
    sentences: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        candidate = text[start : match.start() + 1]
        if text[match.start()] == "." and _ends_with_abbreviation(candidate):
            continue
        stripped = candidate.strip()
        if stripped:
            sentences.append(stripped)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass(frozen=True)
class ChunkPolicy:
    chunk_size: int
    overlap_sentences: int = 1
    min_tail_words: int | None = None

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ChunkPolicyError("chunk_size must be positive")
        if self.overlap_sentences < 0:
            raise ChunkPolicyError("overlap_sentences must be >= 0")
        if self.min_tail_words is None:
            object.__setattr__(self, "min_tail_words", max(1, self.chunk_size // 4))
        if not 0 < self.min_tail_words <= self.chunk_size:
            raise ChunkPolicyError("min_tail_words must be in (0, chunk_size]")


@dataclass(frozen=True)
class Chunk:
    id: str
    parent_id: str
    seq: int
    text: str
    word_count: int
    over_budget: bool = False


def _word_count(sentence: str) -> int:
    return len(sentence.split())


def _pack(sentences: list[str], chunk_size: int) -> list[list[str]]:
    groups: list[list[str]] = []
    current: list[str] = []
    current_words = 0
    for sentence in sentences:
        words = _word_count(sentence)
        if current and current_words + words > chunk_size:
            groups.append(current)
            current = []
            current_words = 0
        current.append(sentence)
        current_words += words
    if current:
        groups.append(current)
    return groups


def chunk_paragraph(paragraph: Paragraph, policy: ChunkPolicy) -> list[Chunk]:
    """Chunk one paragraph. Empty text yields []."""
    sentences = split_sentences(paragraph.text)
    if not sentences:
        return []

    groups = _pack(sentences, policy.chunk_size)

    if len(groups) >= 2 and sum(_word_count(s) for s in groups[-1]) < policy.min_tail_words:
        tail = groups.pop()
        groups[-1] = groups[-1] + tail

    chunks: list[Chunk] = []
    for seq, group in enumerate(groups):
        overlap: list[str] = []
        if seq > 0 and policy.overlap_sentences > 0:
            overlap = groups[seq - 1][-policy.overlap_sentences :]
        text = " ".join(overlap + group)
        core_words = sum(_word_count(s) for s in group)
        chunks.append(
            Chunk(
                id=f"{paragraph.id}:{seq:04d}",
                parent_id=paragraph.id,
                seq=seq,
                text=text,
                word_count=len(text.split()),
                over_budget=core_words > policy.chunk_size,
            )
        )
    return chunks


def chunk_corpus(corpus: Corpus, policy: ChunkPolicy) -> list[Chunk]:
    """Chunk every paragraph; order is (paragraph position, seq)."""
    if len(corpus) == 0:
        raise ValueError("cannot chunk an empty corpus")
    chunks: list[Chunk] = []
    for paragraph in corpus:
        chunks.extend(chunk_paragraph(paragraph, policy))
    return chunks


def dump_chunks(chunks: Iterable[Chunk], fh: IO[str]) -> None:
    for chunk in chunks:
        fh.write(
            json.dumps(
                {"id": chunk.id, "parent_id": chunk.parent_id, "seq": chunk.seq, "text": chunk.text},
                ensure_ascii=False,
            )
            + "\n"
        )
