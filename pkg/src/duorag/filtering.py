"""CoT-guided chunk filtering.

One guidance call produces a chain of thought over every retrieved chunk;
each chunk is then judged independently against that chain and kept only
on a True verdict. Verdict parsing is deliberately forgiving: models wrap
the JSON in prose, single quotes, or bare tokens, and an unparseable
verdict defaults to keep (recall beats precision here). The filtered
chunks preserve retrieval order.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import EmptyCotError, GatewayError, StageError
from .gateway import LlmCall, LlmGateway
from .prompts import CHUNK_FILTER, COT_GUIDANCE
from .retrieval import RetrievalResult

CHUNK_JOIN = "\n\n"

PARSE_CLEAN = "clean"
PARSE_REPAIRED = "repaired"
PARSE_DEFAULTED = "defaulted"


@dataclass(frozen=True)
class GuidingCot:
    text: str
    source_call: LlmCall


@dataclass(frozen=True)
class FilterVerdict:
    chunk_id: str
    keep: bool
    raw_response: str
    parse_status: str
    source_call: LlmCall | None = None  # None when the gateway call itself failed


@dataclass(frozen=True)
class DetailSet:
    chunks: tuple[str, ...]  # kept chunk ids, retrieval order
    verdicts: tuple[FilterVerdict, ...]
    fallback_applied: bool = False


def guide_cot(question: str, result: RetrievalResult, gateway: LlmGateway) -> GuidingCot:
    """One guidance call over all retrieved chunks joined by blank lines."""
    if not result.hits:
        raise ValueError("cannot guide over zero hits")
    content = CHUNK_JOIN.join(hit.chunk.text for hit in result.hits)
    try:
        call = gateway.call(COT_GUIDANCE, {"content": content, "question": question})
    except GatewayError as exc:
        raise StageError("cot_guidance", str(exc)) from exc
    if not call.response.strip():
        raise EmptyCotError()
    return GuidingCot(text=call.response, source_call=call)


def _coerce_status(value: object) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered == "true":
            return True
        if lowered == "false":
            return False
    return None


def _first_brace_block(text: str) -> str | None:
    start = text.find("{")
    if start == -1:
        return None
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


_STATUS_PATTERN = re.compile(r"status[^a-zA-Z]*?(true|false)", re.IGNORECASE)
_WORD_PATTERN = re.compile(r"\b(true|false)\b", re.IGNORECASE)


def parse_verdict(raw: str) -> tuple[bool, str]:
    """Parse a True/False verdict out of a model response.

    Ladder: strict JSON with a "status" field; then a repaired read (first
    balanced brace block, single-quote normalization, status-token regex);
    then the first bare true/false word anywhere; else default to True.
    Returns (keep, parse_status).
    """
    try:
        obj = json.loads(raw)
    except ValueError:
        obj = None
    if isinstance(obj, dict) and "status" in obj:
        label = _coerce_status(obj["status"])
        if label is not None:
            return label, PARSE_CLEAN

    block = _first_brace_block(raw)
    if block is not None:
        for candidate in (block, block.replace("'", '"')):
            try:
                repaired = json.loads(candidate)
            except ValueError:
                continue
            if isinstance(repaired, dict) and "status" in repaired:
                label = _coerce_status(repaired["status"])
                if label is not None:
                    return label, PARSE_REPAIRED

    match = _STATUS_PATTERN.search(raw)
    if match:
        return match.group(1).lower() == "true", PARSE_REPAIRED

    match = _WORD_PATTERN.search(raw)
    if match:
        return match.group(1).lower() == "true", PARSE_REPAIRED

    return True, PARSE_DEFAULTED


def filter_chunks(
    question: str,
    result: RetrievalResult,
    cot: GuidingCot,
    gateway: LlmGateway,
    max_workers: int = 1,
) -> DetailSet:
    """One verdict call per chunk; keep chunks judged relevant.

    A transport failure on a single chunk degrades to a defaulted keep
    instead of aborting the batch. Kept ids preserve retrieval order.
    """
    if not result.hits:
        raise ValueError("cannot filter zero hits")

    def judge(hit) -> FilterVerdict:
        slots = {"content": hit.chunk.text, "question": question, "cot": cot.text}
        try:
            call = gateway.call(CHUNK_FILTER, slots)
        except GatewayError as exc:
            return FilterVerdict(
                chunk_id=hit.chunk.id,
                keep=True,
                raw_response=f"<gateway error: {exc}>",
                parse_status=PARSE_DEFAULTED,
                source_call=None,
            )
        keep, status = parse_verdict(call.response)
        return FilterVerdict(
            chunk_id=hit.chunk.id,
            keep=keep,
            raw_response=call.response,
            parse_status=status,
            source_call=call,
        )

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            verdicts = list(pool.map(judge, result.hits))
    else:
        verdicts = [judge(hit) for hit in result.hits]

    kept = tuple(v.chunk_id for v in verdicts if v.keep)
    return DetailSet(chunks=kept, verdicts=tuple(verdicts), fallback_applied=False)


def keep_all_fallback(result: RetrievalResult, verdicts: tuple[FilterVerdict, ...] = ()) -> DetailSet:
    """Full hit set, marked as a fallback. Used when filtering empties I_d."""
    return DetailSet(
        chunks=tuple(hit.chunk.id for hit in result.hits),
        verdicts=verdicts,
        fallback_applied=True,
    )
