"""Instruction-data construction.

Turns annotated QA records into four kinds of SFT records whose
instruction text uses the exact inference-time prompt formats:

  extractor      teacher extracts from supporting paragraphs only, a judge
                 verifies the answer is derivable from the extraction, and
                 the surviving extraction becomes the target against the
                 full noisy context.
  cot_guiding    teacher writes a chain of thought given the answer, a
                 judge verifies the chain explains the answer.
  filtering      one record per kept paragraph, labeled True for
                 supporting and False for distracting, using the surviving
                 chain of thought; the label classes are balanced by
                 down-sampling the majority.
  task_oriented  plain question answering over the kept context.

Preprocessing drops records with short contexts (per-dataset token
thresholds) and samples how many distractors to keep, at least two when
available. Every random draw is seeded per record, so output is
independent of input order and reproducible byte-for-byte.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

from .corpus import Corpus, QARecord
from .errors import GatewayError, StageError
from .extract import PARAGRAPH_JOIN
from .filtering import PARSE_DEFAULTED, parse_verdict
from .gateway import ApproxTokenCounter, LlmGateway, TokenCounter
from .prompts import (
    CHUNK_FILTER,
    COT_GUIDANCE,
    EXTRACTOR,
    GENERATOR,
    INSTRUCT_COT_JUDGE,
    INSTRUCT_COT_TEACHER,
    INSTRUCT_EXTRACTOR_JUDGE,
    INSTRUCT_EXTRACTOR_TEACHER,
    get_template,
    render,
)

KIND_EXTRACTOR = "extractor"
KIND_COT = "cot_guiding"
KIND_FILTERING = "filtering"
KIND_TASK = "task_oriented"
ALL_KINDS = (KIND_EXTRACTOR, KIND_COT, KIND_FILTERING, KIND_TASK)

FILTER_TRUE_OUTPUT = '{"status": {"True"}}'
FILTER_FALSE_OUTPUT = '{"status": {"False"}}'

DEFAULT_MIN_CONTEXT_TOKENS: Mapping[str, int] = {
    "hotpotqa": 1500,
    "2wikimultihopqa": 1500,
    "2wikimqa": 1500,
    "musique": 2500,
}

DEFAULT_MAX_RECORD_TOKENS: Mapping[str, int] = {
    "hotpotqa": 7000,
    "2wikimultihopqa": 7000,
    "2wikimqa": 7000,
    "musique": 7000,
}


@dataclass(frozen=True)
class InstructPolicy:
    seed: int = 0
    min_context_tokens: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_MIN_CONTEXT_TOKENS)
    )
    max_record_tokens: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_MAX_RECORD_TOKENS)
    )
    min_teacher_tokens: int = 20
    distractor_floor: int = 2

    def context_threshold(self, dataset: str) -> int | None:
        return self.min_context_tokens.get(dataset.lower())

    def record_cap(self, dataset: str) -> int | None:
        return self.max_record_tokens.get(dataset.lower())


@dataclass(frozen=True)
class InstructRecord:
    kind: str
    instruction: str
    output: str
    dataset: str
    qid: str
    token_length: int


@dataclass(frozen=True)
class PreparedRecord:
    record: QARecord
    paragraphs: tuple[str, ...]  # kept ids: supporting first, then sampled distractors
    context_tokens: int

    def context_text(self, corpus: Corpus) -> str:
        return PARAGRAPH_JOIN.join(corpus[pid].text for pid in self.paragraphs)

    def supporting_text(self, corpus: Corpus) -> str:
        return PARAGRAPH_JOIN.join(corpus[pid].text for pid in self.record.supporting)


@dataclass
class BuildReport:
    records_in: int = 0
    records_prepared: int = 0
    kept_by_kind: Counter = field(default_factory=Counter)
    dropped: Counter = field(default_factory=Counter)  # "stage/reason" -> count

    def drop(self, stage: str, reason: str, n: int = 1) -> None:
        self.dropped[f"{stage}/{reason}"] += n

    def as_dict(self) -> dict:
        return {
            "records_in": self.records_in,
            "records_prepared": self.records_prepared,
            "kept_by_kind": dict(sorted(self.kept_by_kind.items())),
            "dropped": dict(sorted(self.dropped.items())),
        }


def _record_rng(policy: InstructPolicy, record: QARecord, purpose: str) -> random.Random:
    return random.Random(f"{policy.seed}:{record.dataset}:{record.qid}:{purpose}")


def preprocess(
    records: Sequence[QARecord],
    corpus: Corpus,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
) -> list[PreparedRecord]:
    """Apply context-length thresholds and distractor sampling.

    The threshold is measured on the full original context (all paragraphs
    joined by blank lines). Distractor sampling keeps a uniform count in
    [2, |distracting|] when more than two exist, in record order;
    supporting paragraphs are never dropped.
    """
    prepared: list[PreparedRecord] = []
    for record in records:
        report.records_in += 1
        for pid in record.paragraph_ids:
            if pid not in corpus:
                raise StageError("preprocess", f"record {record.qid} references unknown paragraph {pid}")
        full_context = PARAGRAPH_JOIN.join(corpus[pid].text for pid in record.paragraph_ids)
        threshold = policy.context_threshold(record.dataset)
        if threshold is not None and counter.count(full_context) < threshold:
            report.drop("preprocess", "below_context_threshold")
            continue

        distracting = list(record.distracting)
        if len(distracting) > policy.distractor_floor:
            rng = _record_rng(policy, record, "distractors")
            count = rng.randint(policy.distractor_floor, len(distracting))
            chosen = sorted(rng.sample(range(len(distracting)), count))
            distracting = [distracting[i] for i in chosen]

        kept = record.supporting + tuple(distracting)
        context = PARAGRAPH_JOIN.join(corpus[pid].text for pid in kept)
        prepared.append(
            PreparedRecord(record=record, paragraphs=kept, context_tokens=counter.count(context))
        )
        report.records_prepared += 1
    return prepared


def _emit(
    kind: str,
    instruction: str,
    output: str,
    record: QARecord,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
    out: list[InstructRecord],
) -> None:
    token_length = counter.count(instruction) + counter.count(output)
    cap = policy.record_cap(record.dataset)
    if cap is not None and token_length >= cap:
        report.drop(kind, "over_token_cap")
        return
    out.append(
        InstructRecord(
            kind=kind,
            instruction=instruction,
            output=output,
            dataset=record.dataset,
            qid=record.qid,
            token_length=token_length,
        )
    )
    report.kept_by_kind[kind] += 1


def _judge_keeps(response: str) -> tuple[bool, bool]:
    """(keep, parseable). A defaulted parse never admits a record."""
    keep, status = parse_verdict(response)
    if status == PARSE_DEFAULTED:
        return False, False
    return keep, True


def build_extractor_data(
    prepared: Sequence[PreparedRecord],
    corpus: Corpus,
    gateway: LlmGateway,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
) -> list[InstructRecord]:
    out: list[InstructRecord] = []
    for item in prepared:
        record = item.record
        if not record.supporting:
            report.drop(KIND_EXTRACTOR, "no_supporting_paragraphs")
            continue
        try:
            teacher = gateway.call(
                INSTRUCT_EXTRACTOR_TEACHER,
                {"content": item.supporting_text(corpus), "question": record.question},
            )
        except GatewayError as exc:
            raise StageError("instruct_extractor", str(exc)) from exc
        info = teacher.response
        if counter.count(info) < policy.min_teacher_tokens:
            report.drop(KIND_EXTRACTOR, "short_teacher_response")
            continue
        try:
            judge = gateway.call(
                INSTRUCT_EXTRACTOR_JUDGE,
                {"question": record.question, "info": info, "answer": record.answer},
            )
        except GatewayError as exc:
            raise StageError("instruct_extractor", str(exc)) from exc
        keep, parseable = _judge_keeps(judge.response)
        if not parseable:
            report.drop(KIND_EXTRACTOR, "judge_unparseable")
            continue
        if not keep:
            report.drop(KIND_EXTRACTOR, "judge_rejected")
            continue
        instruction = render(
            get_template(EXTRACTOR),
            {"content": item.context_text(corpus), "question": record.question},
        )
        _emit(KIND_EXTRACTOR, instruction, info, record, policy, counter, report, out)
    return out


def build_cot_data(
    prepared: Sequence[PreparedRecord],
    corpus: Corpus,
    gateway: LlmGateway,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
) -> tuple[list[InstructRecord], dict[str, str]]:
    """Returns the records plus {qid: cot} for every judged-good chain,
    which the filtering builder reuses."""
    out: list[InstructRecord] = []
    survivors: dict[str, str] = {}
    for item in prepared:
        record = item.record
        try:
            teacher = gateway.call(
                INSTRUCT_COT_TEACHER,
                {
                    "content": item.context_text(corpus),
                    "question": record.question,
                    "answer": record.answer,
                },
            )
        except GatewayError as exc:
            raise StageError("instruct_cot", str(exc)) from exc
        cot = teacher.response
        if counter.count(cot) < policy.min_teacher_tokens:
            report.drop(KIND_COT, "short_teacher_response")
            continue
        try:
            judge = gateway.call(
                INSTRUCT_COT_JUDGE,
                {"question": record.question, "cot": cot, "answer": record.answer},
            )
        except GatewayError as exc:
            raise StageError("instruct_cot", str(exc)) from exc
        keep, parseable = _judge_keeps(judge.response)
        if not parseable:
            report.drop(KIND_COT, "judge_unparseable")
            continue
        if not keep:
            report.drop(KIND_COT, "judge_rejected")
            continue
        survivors[record.qid] = cot
        instruction = render(
            get_template(COT_GUIDANCE),
            {"content": item.context_text(corpus), "question": record.question},
        )
        _emit(KIND_COT, instruction, cot, record, policy, counter, report, out)
    return out, survivors


def build_filter_data(
    prepared: Sequence[PreparedRecord],
    survivors: Mapping[str, str],
    corpus: Corpus,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
) -> list[InstructRecord]:
    """One labeled record per kept paragraph, then balance the labels."""
    candidates: list[InstructRecord] = []
    for item in prepared:
        record = item.record
        cot = survivors.get(record.qid)
        if cot is None:
            report.drop(KIND_FILTERING, "no_surviving_cot")
            continue
        supporting = set(record.supporting)
        for pid in item.paragraphs:
            instruction = render(
                get_template(CHUNK_FILTER),
                {"content": corpus[pid].text, "question": record.question, "cot": cot},
            )
            output = FILTER_TRUE_OUTPUT if pid in supporting else FILTER_FALSE_OUTPUT
            token_length = counter.count(instruction) + counter.count(output)
            cap = policy.record_cap(record.dataset)
            if cap is not None and token_length >= cap:
                report.drop(KIND_FILTERING, "over_token_cap")
                continue
            candidates.append(
                InstructRecord(
                    kind=KIND_FILTERING,
                    instruction=instruction,
                    output=output,
                    dataset=record.dataset,
                    qid=record.qid,
                    token_length=token_length,
                )
            )

    true_indexes = [i for i, rec in enumerate(candidates) if rec.output == FILTER_TRUE_OUTPUT]
    false_indexes = [i for i, rec in enumerate(candidates) if rec.output == FILTER_FALSE_OUTPUT]
    target = min(len(true_indexes), len(false_indexes))
    rng = random.Random(f"{policy.seed}:filter_balance")
    kept_true = true_indexes if len(true_indexes) <= target else rng.sample(true_indexes, target)
    kept_false = false_indexes if len(false_indexes) <= target else rng.sample(false_indexes, target)
    keep_indexes = set(kept_true) | set(kept_false)

    dropped = len(candidates) - len(keep_indexes)
    if dropped:
        report.drop(KIND_FILTERING, "balance_dropped", dropped)
    out = [candidates[i] for i in sorted(keep_indexes)]
    report.kept_by_kind[KIND_FILTERING] += len(out)
    return out


def build_task_data(
    prepared: Sequence[PreparedRecord],
    corpus: Corpus,
    policy: InstructPolicy,
    counter: TokenCounter,
    report: BuildReport,
) -> list[InstructRecord]:
    out: list[InstructRecord] = []
    for item in prepared:
        record = item.record
        instruction = render(
            get_template(GENERATOR),
            {"content": item.context_text(corpus), "question": record.question},
        )
        _emit(KIND_TASK, instruction, record.answer, record, policy, counter, report, out)
    return out


def build_instruct_dataset(
    records: Sequence[QARecord],
    corpus: Corpus,
    gateway: LlmGateway,
    policy: InstructPolicy | None = None,
    counter: TokenCounter | None = None,
    kinds: Sequence[str] = ALL_KINDS,
) -> tuple[list[InstructRecord], BuildReport]:
    policy = policy or InstructPolicy()
    counter = counter or ApproxTokenCounter()
    unknown = set(kinds) - set(ALL_KINDS)
    if unknown:
        raise ValueError(f"unknown instruct kinds: {sorted(unknown)}")

    report = BuildReport()
    prepared = preprocess(records, corpus, policy, counter, report)

    out: list[InstructRecord] = []
    if KIND_EXTRACTOR in kinds:
        out.extend(build_extractor_data(prepared, corpus, gateway, policy, counter, report))
    if KIND_COT in kinds or KIND_FILTERING in kinds:
        cot_records, survivors = build_cot_data(prepared, corpus, gateway, policy, counter, report)
        if KIND_COT in kinds:
            out.extend(cot_records)
        else:
            report.kept_by_kind.pop(KIND_COT, None)
        if KIND_FILTERING in kinds:
            out.extend(build_filter_data(prepared, survivors, corpus, policy, counter, report))
    if KIND_TASK in kinds:
        out.extend(build_task_data(prepared, corpus, policy, counter, report))
    return out, report


def instruct_records_to_jsonl(records: Sequence[InstructRecord], fh: IO[str]) -> None:
    for rec in records:
        fh.write(
            json.dumps(
                {
                    "kind": rec.kind,
                    "instruction": rec.instruction,
                    "output": rec.output,
                    "dataset": rec.dataset,
                    "qid": rec.qid,
                },
                ensure_ascii=False,
            )
            + "\n"
        )
