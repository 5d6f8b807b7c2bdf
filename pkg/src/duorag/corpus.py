"""Paragraph corpus: ingestion, normalization, dedup, and JSONL round-trips.

A corpus is an ordered, deduplicated set of paragraphs keyed by a content
hash of their normalized text. QA records reference paragraphs by id and
keep the supporting/distracting split from the source annotations.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import DuoragError, MalformedRecordError

_US = "\x1f"  # unit separator, used when hashing field pairs


def normalize_text(raw: str) -> str:
    """NFC-normalize and collapse all whitespace runs to single spaces.

    Idempotent; returns "" for whitespace-only input.
    """
    return " ".join(unicodedata.normalize("NFC", raw).split())


def content_id(normalized: str) -> str:
    return hashlib.sha1(normalized.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Paragraph:
    id: str
    title: str
    text: str
    source_dataset: str
    word_count: int

    @classmethod
    def from_text(cls, text: str, title: str = "", source_dataset: str = "") -> "Paragraph":
        normalized = normalize_text(text)
        if not normalized:
            raise DuoragError("paragraph text is empty after normalization")
        return cls(
            id=content_id(normalized),
            title=normalize_text(title),
            text=normalized,
            source_dataset=source_dataset,
            word_count=len(normalized.split()),
        )


@dataclass(frozen=True)
class QARecord:
    question: str
    answer: str
    supporting: tuple[str, ...]
    distracting: tuple[str, ...]
    dataset: str

    def __post_init__(self) -> None:
        overlap = set(self.supporting) & set(self.distracting)
        if overlap:
            raise DuoragError(f"supporting/distracting overlap: {sorted(overlap)}")

    @property
    def qid(self) -> str:
        return hashlib.sha1((self.question + _US + self.answer).encode("utf-8")).hexdigest()[:16]

    @property
    def paragraph_ids(self) -> tuple[str, ...]:
        return self.supporting + self.distracting


class Corpus:
    """Ordered collection of unique paragraphs with id lookup."""

    def __init__(self, paragraphs: Iterable[Paragraph]):
        self._paragraphs: list[Paragraph] = []
        self._by_id: dict[str, Paragraph] = {}
        self.dedup_index: dict[str, str] = {}
        for p in paragraphs:
            self._add(p)

    def _add(self, p: Paragraph) -> Paragraph:
        existing = self._by_id.get(p.id)
        if existing is not None:
            return existing
        self._paragraphs.append(p)
        self._by_id[p.id] = p
        self.dedup_index[p.id] = p.id
        return p

    def __len__(self) -> int:
        return len(self._paragraphs)

    def __iter__(self) -> Iterator[Paragraph]:
        return iter(self._paragraphs)

    def __contains__(self, pid: str) -> bool:
        return pid in self._by_id

    def __getitem__(self, pid: str) -> Paragraph:
        return self._by_id[pid]

    def get(self, pid: str) -> Paragraph | None:
        return self._by_id.get(pid)

    def to_jsonl(self, fh: IO[str]) -> None:
        for p in self._paragraphs:
            fh.write(
                json.dumps(
                    {
                        "id": p.id,
                        "title": p.title,
                        "text": p.text,
                        "source_dataset": p.source_dataset,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    @classmethod
    def from_jsonl(cls, fh: IO[str]) -> "Corpus":
        paragraphs = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            paragraphs.append(
                Paragraph(
                    id=obj["id"],
                    title=obj.get("title", ""),
                    text=obj["text"],
                    source_dataset=obj.get("source_dataset", ""),
                    word_count=len(obj["text"].split()),
                )
            )
        return cls(paragraphs)


@dataclass
class IngestReport:
    records_total: int = 0
    records_kept: int = 0
    paragraphs_seen: int = 0
    paragraphs_kept: int = 0
    duplicates_merged: int = 0
    empty_paragraphs_skipped: list[tuple[int, int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "records_total": self.records_total,
            "records_kept": self.records_kept,
            "paragraphs_seen": self.paragraphs_seen,
            "paragraphs_kept": self.paragraphs_kept,
            "duplicates_merged": self.duplicates_merged,
            "empty_paragraphs_skipped": [list(t) for t in self.empty_paragraphs_skipped],
        }


@dataclass
class IngestResult:
    corpus: Corpus
    records: list[QARecord]
    report: IngestReport


def ingest_dataset(raw_records: Iterable[dict], default_dataset: str = "") -> IngestResult:
    """Build a deduplicated corpus and QA records from raw dataset rows.

    Each row needs "question", "answer", and a non-empty "paragraphs" list of
    {"title", "text", "is_supporting"} objects. Duplicate paragraph texts
    (after normalization) collapse to one id; every referencing record points
    at the surviving paragraph. A malformed row raises with its index;
    paragraphs that normalize to "" are skipped and counted instead.
    """
    corpus = Corpus([])
    records: list[QARecord] = []
    report = IngestReport()

    for index, raw in enumerate(raw_records):
        report.records_total += 1
        if not isinstance(raw, dict):
            raise MalformedRecordError(index, "record is not an object")
        question = raw.get("question")
        answer = raw.get("answer")
        paragraphs = raw.get("paragraphs")
        if not isinstance(question, str) or not question.strip():
            raise MalformedRecordError(index, "missing question")
        if not isinstance(answer, str):
            raise MalformedRecordError(index, "missing answer")
        if not isinstance(paragraphs, list) or not paragraphs:
            raise MalformedRecordError(index, "missing paragraph list")
        dataset = raw.get("dataset", default_dataset)

        supporting: list[str] = []
        distracting: list[str] = []
        for p_index, p_raw in enumerate(paragraphs):
            if not isinstance(p_raw, dict) or "text" not in p_raw:
                raise MalformedRecordError(index, f"paragraph {p_index} has no text field")
            report.paragraphs_seen += 1
            normalized = normalize_text(p_raw["text"])
            if not normalized:
                report.empty_paragraphs_skipped.append((index, p_index))
                continue
            paragraph = Paragraph.from_text(
                p_raw["text"],
                title=p_raw.get("title", ""),
                source_dataset=dataset,
            )
            before = len(corpus)
            kept = corpus._add(paragraph)
            if len(corpus) == before:
                report.duplicates_merged += 1
            bucket = supporting if p_raw.get("is_supporting", False) else distracting
            if kept.id not in bucket:
                bucket.append(kept.id)

        # A duplicate may alias a supporting and a distracting paragraph to
        # the same id; evidence wins.
        distracting = [pid for pid in distracting if pid not in supporting]

        records.append(
            QARecord(
                question=question,
                answer=answer,
                supporting=tuple(supporting),
                distracting=tuple(distracting),
                dataset=dataset,
            )
        )
        report.records_kept += 1

    report.paragraphs_kept = len(corpus)
    return IngestResult(corpus=corpus, records=records, report=report)


def read_jsonl(fh: IO[str]) -> list[dict]:
    rows = []
    for line in fh:
        line = line.strip()
        if line:
            rows.append(json.loads(line))
    return rows


def qa_records_to_jsonl(records: Iterable[QARecord], fh: IO[str]) -> None:
    for rec in records:
        fh.write(
            json.dumps(
                {
                    "qid": rec.qid,
                    "question": rec.question,
                    "answer": rec.answer,
                    "supporting": list(rec.supporting),
                    "distracting": list(rec.distracting),
                    "dataset": rec.dataset,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def qa_records_from_jsonl(fh: IO[str]) -> list[QARecord]:
    records = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        records.append(
            QARecord(
                question=obj["question"],
                answer=obj["answer"],
                supporting=tuple(obj.get("supporting", ())),
                distracting=tuple(obj.get("distracting", ())),
                dataset=obj.get("dataset", ""),
            )
        )
    return records
