"""Answer scoring and experiment running.

Token-level F1 with the standard reading-comprehension normalization:
lowercase, strip punctuation, drop articles, collapse whitespace. The
experiment runner executes a strategy grid over a question set, records
per-question scores and generator token usage, and emits deterministic
CSV and aligned-table reports.
"""

from __future__ import annotations

import csv
import io
import logging
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .chunking import ChunkPolicy, chunk_corpus
from .corpus import Corpus, QARecord
from .errors import DuoragError
from .gateway import LlmGateway
from .pipeline import Pipeline, PipelineOptions, PipelineTrace, Strategy, StrategyConfig, STRATEGY_ORDER
from .retrieval import Embedder, PairScorer, build_index

logger = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def f1_score(prediction: str, gold: str) -> float:
    """Token overlap F1 in [0, 1]. Both empty -> 1.0; one empty -> 0.0."""
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class QuestionScore:
    qid: str
    f1: float
    answer: str
    gold: str
    generator_input_tokens: int
    generated_tokens: int
    error: str = ""


@dataclass
class EvalResult:
    config: StrategyConfig
    dataset: str
    scores: list[QuestionScore] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.scores)

    def mean_f1(self) -> float:
        """Mean F1 as a percentage (0-100)."""
        if not self.scores:
            return 0.0
        return 100.0 * sum(s.f1 for s in self.scores) / len(self.scores)

    def mean_gen_tokens(self) -> float:
        """Mean generator input tokens per question."""
        if not self.scores:
            return 0.0
        return sum(s.generator_input_tokens for s in self.scores) / len(self.scores)


class ExperimentRunner:
    """Runs strategy grids against one corpus.

    Pipelines are cached per chunk size so a grid shares indexes. A failed
    question scores 0.0 and carries the error text; the run never aborts
    on a single bad question.
    """

    def __init__(
        self,
        corpus: Corpus,
        embedder: Embedder,
        pair_scorer: PairScorer,
        gateway: LlmGateway,
        options: PipelineOptions | None = None,
        chunk_policy_factory: Callable[[int], ChunkPolicy] | None = None,
        jobs: int = 1,
    ):
        self.corpus = corpus
        self.embedder = embedder
        self.pair_scorer = pair_scorer
        self.gateway = gateway
        self.options = options or PipelineOptions()
        self.chunk_policy_factory = chunk_policy_factory or (lambda size: ChunkPolicy(size))
        self.jobs = max(1, jobs)
        self._pipelines: dict[int, Pipeline] = {}

    def pipeline_for(self, chunk_size: int) -> Pipeline:
        if chunk_size not in self._pipelines:
            chunks = chunk_corpus(self.corpus, self.chunk_policy_factory(chunk_size))
            index = build_index(chunks, self.embedder)
            self._pipelines[chunk_size] = Pipeline(
                self.corpus, index, self.pair_scorer, self.gateway, self.options
            )
        return self._pipelines[chunk_size]

    def _score_one(self, pipeline: Pipeline, record: QARecord, config: StrategyConfig) -> QuestionScore:
        try:
            trace: PipelineTrace = pipeline.run_question(record.question, config)
        except DuoragError as exc:
            logger.warning("question %s failed under %s: %s", record.qid, config.strategy.value, exc)
            return QuestionScore(
                qid=record.qid,
                f1=0.0,
                answer="",
                gold=record.answer,
                generator_input_tokens=0,
                generated_tokens=0,
                error=str(exc),
            )
        return QuestionScore(
            qid=record.qid,
            f1=f1_score(trace.answer, record.answer),
            answer=trace.answer,
            gold=record.answer,
            generator_input_tokens=trace.generator_input_tokens,
            generated_tokens=trace.generated_tokens,
        )

    def run_experiment(
        self,
        questions: Sequence[QARecord],
        grid: Sequence[StrategyConfig],
        dataset: str = "",
    ) -> list[EvalResult]:
        if not questions:
            raise ValueError("no questions to evaluate")
        results = []
        for config in grid:
            pipeline = self.pipeline_for(config.chunk_size)
            if self.jobs > 1:
                with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                    scores = list(
                        pool.map(lambda rec: self._score_one(pipeline, rec, config), questions)
                    )
            else:
                scores = [self._score_one(pipeline, rec, config) for rec in questions]
            results.append(EvalResult(config=config, dataset=dataset, scores=scores))
        return results


_STRATEGY_RANK = {s: i for i, s in enumerate(STRATEGY_ORDER)}

CSV_COLUMNS = ["strategy", "chunk_size", "top_k", "dataset", "mean_f1", "mean_gen_tokens", "n"]


def _sorted_results(results: Sequence[EvalResult]) -> list[EvalResult]:
    return sorted(
        results,
        key=lambda r: (
            r.dataset,
            r.config.chunk_size,
            r.config.top_k,
            _STRATEGY_RANK[r.config.strategy],
        ),
    )


def results_to_csv(results: Sequence[EvalResult]) -> str:
    """Deterministic CSV: fixed columns, sorted rows, fixed float formats."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for result in _sorted_results(results):
        writer.writerow(
            [
                result.config.strategy.value,
                result.config.chunk_size,
                result.config.top_k,
                result.dataset,
                f"{result.mean_f1():.4f}",
                f"{result.mean_gen_tokens():.2f}",
                result.n,
            ]
        )
    return buffer.getvalue()


def results_to_table(results: Sequence[EvalResult]) -> str:
    """Aligned text table, one row per (dataset, chunk_size, top_k) group."""
    groups: dict[tuple[str, int, int], dict[Strategy, EvalResult]] = {}
    for result in _sorted_results(results):
        key = (result.dataset, result.config.chunk_size, result.config.top_k)
        groups.setdefault(key, {})[result.config.strategy] = result

    header = ["dataset", "grid"] + [s.value for s in STRATEGY_ORDER]
    rows = [header]
    for (dataset, chunk_size, top_k), by_strategy in groups.items():
        row = [dataset or "-", f"{chunk_size}*{top_k}"]
        for strategy in STRATEGY_ORDER:
            result = by_strategy.get(strategy)
            row.append(f"{result.mean_f1():.2f}" if result else "-")
        rows.append(row)

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def parse_grid_point(text: str) -> tuple[int, int]:
    """Parse a "chunk_size*top_k" grid point like "200*7"."""
    match = re.fullmatch(r"\s*(\d+)\s*\*\s*(\d+)\s*", text)
    if not match:
        raise ValueError(f"bad grid point {text!r}, expected CHUNK*TOPK like 200*7")
    chunk_size, top_k = int(match.group(1)), int(match.group(2))
    if chunk_size <= 0 or top_k <= 0:
        raise ValueError(f"grid point {text!r} must be positive")
    return chunk_size, top_k
