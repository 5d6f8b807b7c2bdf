"""Question-answering pipeline: five context-assembly strategies.

RB  retrieve-and-bundle: generator sees the retrieved chunks.
RL  retrieve-and-lift: chunks are lifted to their full source paragraphs.
EXT chunks plus the globally extracted information.
FIL chunks that survive CoT-guided filtering.
EF  extracted global information plus the filtered chunks.

Every model call flows through the gateway; the trace records each call
in execution order so budgets are auditable (RB/RL: 1 call, EXT: 2,
FIL: k+2, EF: k+3 for k retrieved chunks).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO

from .corpus import Corpus
from .errors import EmptyCotError, GatewayError, StageError
from .extract import GlobalInfo, MappedContext, extract_global, map_chunks
from .filtering import DetailSet, GuidingCot, filter_chunks, guide_cot, keep_all_fallback
from .gateway import LlmCall, LlmGateway
from .prompts import GENERATOR
from .retrieval import PairScorer, RetrievalResult, VectorIndex, retrieve

CONTEXT_JOIN = "\n\n"


class Strategy(str, enum.Enum):
    RB = "RB"
    RL = "RL"
    EXT = "EXT"
    FIL = "FIL"
    EF = "EF"


STRATEGY_ORDER = (Strategy.RB, Strategy.RL, Strategy.EXT, Strategy.FIL, Strategy.EF)


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy
    chunk_size: int
    top_k: int
    coarse_n: int = 0  # 0 means "derive from top_k"

    def __post_init__(self) -> None:
        if self.chunk_size <= 0 or self.top_k <= 0:
            raise ValueError("chunk_size and top_k must be positive")
        if self.coarse_n == 0:
            object.__setattr__(self, "coarse_n", max(50, 5 * self.top_k))
        if self.coarse_n < self.top_k:
            raise ValueError("coarse_n must be >= top_k")


@dataclass(frozen=True)
class PipelineOptions:
    passage_headers: bool = False
    ig_first_for_ext: bool = False
    mapping_use_score: str = "fine"
    mapping_order: str = "rank"
    on_empty_cot: str = "error"  # or "keep_all"
    filter_workers: int = 1

    def __post_init__(self) -> None:
        if self.on_empty_cot not in ("error", "keep_all"):
            raise ValueError("on_empty_cot must be 'error' or 'keep_all'")


@dataclass
class PipelineTrace:
    question: str
    strategy: Strategy
    retrieval: RetrievalResult
    answer: str
    generator_prompt: str
    generator_input_tokens: int
    generated_tokens: int
    calls: list[LlmCall] = field(default_factory=list)
    mapped: MappedContext | None = None
    global_info: GlobalInfo | None = None
    cot: GuidingCot | None = None
    detail: DetailSet | None = None

    @property
    def llm_call_count(self) -> int:
        return len(self.calls)

    def as_dict(self) -> dict:
        return {
            "question": self.question,
            "strategy": self.strategy.value,
            "hits": [
                {"chunk_id": h.chunk.id, "coarse": h.coarse_score, "fine": h.fine_score}
                for h in self.retrieval.hits
            ],
            "mapped": (
                {
                    "paragraphs": list(self.mapped.paragraphs),
                    "origin": {pid: list(pair) for pid, pair in self.mapped.origin.items()},
                }
                if self.mapped
                else None
            ),
            "global_info": self.global_info.text if self.global_info else None,
            "cot": self.cot.text if self.cot else None,
            "detail": (
                {
                    "chunks": list(self.detail.chunks),
                    "verdicts": [
                        {
                            "chunk_id": v.chunk_id,
                            "keep": v.keep,
                            "parse_status": v.parse_status,
                            "raw_response": v.raw_response,
                        }
                        for v in self.detail.verdicts
                    ],
                    "fallback_applied": self.detail.fallback_applied,
                }
                if self.detail
                else None
            ),
            "generator_prompt": self.generator_prompt,
            "answer": self.answer,
            "generator_input_tokens": self.generator_input_tokens,
            "generated_tokens": self.generated_tokens,
            "calls": [c.as_dict() for c in self.calls],
        }


def dump_traces(traces: list[PipelineTrace], fh: IO[str]) -> None:
    for trace in traces:
        fh.write(json.dumps(trace.as_dict(), ensure_ascii=False, sort_keys=True) + "\n")


@dataclass(frozen=True)
class StageTokens:
    template: str
    prompt_tokens: int
    response_tokens: int


@dataclass(frozen=True)
class TokenReport:
    generator_input_tokens: int
    generated_tokens: int
    stages: tuple[StageTokens, ...]

    @property
    def total_prompt_tokens(self) -> int:
        return sum(s.prompt_tokens for s in self.stages)

    @property
    def total_response_tokens(self) -> int:
        return sum(s.response_tokens for s in self.stages)


def meter_tokens(trace: PipelineTrace) -> TokenReport:
    return TokenReport(
        generator_input_tokens=trace.generator_input_tokens,
        generated_tokens=trace.generated_tokens,
        stages=tuple(
            StageTokens(c.template, c.prompt_tokens, c.response_tokens) for c in trace.calls
        ),
    )


class Pipeline:
    def __init__(
        self,
        corpus: Corpus,
        index: VectorIndex,
        pair_scorer: PairScorer,
        gateway: LlmGateway,
        options: PipelineOptions | None = None,
    ):
        self.corpus = corpus
        self.index = index
        self.pair_scorer = pair_scorer
        self.gateway = gateway
        self.options = options or PipelineOptions()

    def _format_passages(self, texts: list[str]) -> str:
        if self.options.passage_headers:
            texts = [f"Passage {i}:\n{text}" for i, text in enumerate(texts, start=1)]
        return CONTEXT_JOIN.join(texts)

    def run_question(self, question: str, config: StrategyConfig) -> PipelineTrace:
        if not question.strip():
            raise ValueError("question is empty")
        result = retrieve(question, self.index, self.pair_scorer, config.coarse_n, config.top_k)
        if not result.hits:
            raise StageError("retrieval", "no chunks retrieved")

        calls: list[LlmCall] = []
        mapped: MappedContext | None = None
        global_info: GlobalInfo | None = None
        cot: GuidingCot | None = None
        detail: DetailSet | None = None
        chunk_by_id = {hit.chunk.id: hit.chunk for hit in result.hits}
        chunk_texts = [hit.chunk.text for hit in result.hits]

        def do_map() -> MappedContext:
            return map_chunks(
                result,
                self.corpus,
                use_score=self.options.mapping_use_score,
                order=self.options.mapping_order,
            )

        def do_extract(ctx: MappedContext) -> GlobalInfo:
            info = extract_global(question, ctx, self.corpus, self.gateway)
            calls.append(info.source_call)
            return info

        def do_filter() -> tuple[GuidingCot | None, DetailSet]:
            try:
                guiding = guide_cot(question, result, self.gateway)
            except EmptyCotError:
                if self.options.on_empty_cot == "keep_all":
                    return None, keep_all_fallback(result)
                raise
            calls.append(guiding.source_call)
            kept = filter_chunks(
                question, result, guiding, self.gateway, max_workers=self.options.filter_workers
            )
            calls.extend(v.source_call for v in kept.verdicts if v.source_call is not None)
            if not kept.chunks:
                kept = keep_all_fallback(result, kept.verdicts)
            return guiding, kept

        strategy = config.strategy
        if strategy == Strategy.RB:
            context = self._format_passages(chunk_texts)
        elif strategy == Strategy.RL:
            mapped = do_map()
            context = self._format_passages(mapped.texts(self.corpus))
        elif strategy == Strategy.EXT:
            mapped = do_map()
            global_info = do_extract(mapped)
            passages = self._format_passages(chunk_texts)
            if self.options.ig_first_for_ext:
                context = global_info.text + CONTEXT_JOIN + passages
            else:
                context = passages + CONTEXT_JOIN + global_info.text
        elif strategy == Strategy.FIL:
            cot, detail = do_filter()
            context = self._format_passages([chunk_by_id[cid].text for cid in detail.chunks])
        elif strategy == Strategy.EF:
            mapped = do_map()
            global_info = do_extract(mapped)
            cot, detail = do_filter()
            passages = self._format_passages([chunk_by_id[cid].text for cid in detail.chunks])
            context = global_info.text + CONTEXT_JOIN + passages
        else:  # pragma: no cover
            raise ValueError(f"unknown strategy {strategy!r}")

        try:
            generation = self.gateway.call(GENERATOR, {"content": context, "question": question})
        except GatewayError as exc:
            raise StageError("generator", str(exc)) from exc
        calls.append(generation)

        return PipelineTrace(
            question=question,
            strategy=strategy,
            retrieval=result,
            answer=generation.response.strip(),
            generator_prompt=generation.prompt,
            generator_input_tokens=generation.prompt_tokens,
            generated_tokens=generation.response_tokens,
            calls=calls,
            mapped=mapped,
            global_info=global_info,
            cot=cot,
            detail=detail,
        )
