"""Regenerate the instruction-data fixtures under tests/data and tests/goldens.

Builds a 20-record QA fixture spanning four datasets with controlled
context lengths (some records sit below their dataset's context-token
threshold on purpose), scripts every teacher and judge call the builder
will make, runs the builder once with seed 0, and freezes the outputs:

  tests/data/instruct_raw.jsonl       raw rows in ingest format
  tests/data/instruct_corpus.jsonl    ingested corpus
  tests/data/instruct_qa.jsonl        ingested QA records
  tests/data/instruct_mock.jsonl      scripted model responses by call key
  tests/goldens/instruct_reference.jsonl   expected builder output
  tests/goldens/instruct_report.json       expected builder report

Run from the repository root:  python3 tools/gen_instruct_fixture.py
"""

from __future__ import annotations

import io
import json
import random
from pathlib import Path

from duorag.corpus import ingest_dataset, qa_records_to_jsonl
from duorag.gateway import ApproxTokenCounter, LlmGateway, load_mock_script_path, mock_key
from duorag.instruct import (
    BuildReport,
    InstructPolicy,
    build_instruct_dataset,
    instruct_records_to_jsonl,
    preprocess,
)
from duorag.prompts import (
    INSTRUCT_COT_JUDGE,
    INSTRUCT_COT_TEACHER,
    INSTRUCT_EXTRACTOR_JUDGE,
    INSTRUCT_EXTRACTOR_TEACHER,
)

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"
GOLDENS = ROOT / "tests" / "goldens"

FILLERS = [
    "The seasonal registry lists every crossing made before the thaw",
    "Caretakers rotated monthly and soon copied each entry twice for safety",
    "A later appendix corrects the mileage reported by the first survey",
    "Visitors remarked that the shelving followed no obvious order at all",
    "Ferry timetables from that decade survive only in partial transcription",
    "An annotated map shows the depot roughly two miles north of the weir",
    "The clerk responsible signed with initials that match no census entry",
    "Restoration work in later years replaced most of the original planking",
    "Local almanacs disagree about the founding season by nearly a year",
    "Several receipts mention grain shipments that never reached the ledger",
    "The watchhouse burned twice and both fires started in the same corner",
    "Oral accounts describe a bell that rang whenever the water rose quickly",
]

# (tag, dataset, target context bytes, role of this record in the gate tests)
SPECS = [
    ("h0", "hotpotqa", 6600, "keep"),
    ("h1", "hotpotqa", 6900, "extractor_teacher_short"),
    ("h2", "hotpotqa", 7200, "cot_teacher_short"),
    ("h3", "hotpotqa", 6700, "keep"),
    ("h4", "hotpotqa", 7400, "keep"),
    ("h5", "hotpotqa", 4200, "below_threshold"),
    ("h6", "hotpotqa", 3900, "below_threshold"),
    ("h7", "hotpotqa", 7000, "keep"),
    ("w0", "2wikimultihopqa", 6800, "extractor_judge_false"),
    ("w1", "2wikimultihopqa", 7000, "cot_judge_garbage"),
    ("w2", "2wikimultihopqa", 6600, "keep"),
    ("w3", "2wikimultihopqa", 4400, "below_threshold"),
    ("m0", "musique", 10600, "extractor_judge_garbage"),
    ("m1", "musique", 11000, "keep"),
    ("m2", "musique", 10400, "keep"),
    ("m3", "musique", 7000, "below_threshold"),
    ("q0", "qasper", 1100, "keep"),
    ("q1", "qasper", 900, "cot_judge_false"),
    ("q2", "qasper", 1300, "keep"),
    ("q3", "qasper", 700, "keep"),
]

SHORT_RESPONSE = "Too thin to extract."  # 5 tokens, below the 20-token floor


def make_paragraph_text(rng: random.Random, tag: str, label: str, target_bytes: int) -> str:
    sentences = [f"Record {tag} {label} opens with a note on the {tag} crossing."]
    while len(" ".join(sentences)) < target_bytes:
        sentences.append(f"{rng.choice(FILLERS)} near the {tag} span.")
    return " ".join(sentences)


def build_raw_rows() -> list[dict]:
    rng = random.Random(4242)
    rows = []
    for i, (tag, dataset, total_bytes, _) in enumerate(SPECS):
        n_distract = 3 + (i % 6)
        n_para = 2 + n_distract
        per_para = total_bytes // n_para
        paragraphs = []
        for s in range(2):
            paragraphs.append(
                {
                    "title": f"{tag} evidence {s}",
                    "text": make_paragraph_text(rng, tag, f"support-{s}", per_para),
                    "is_supporting": True,
                }
            )
        for d in range(n_distract):
            paragraphs.append(
                {
                    "title": f"{tag} noise {d}",
                    "text": make_paragraph_text(rng, tag, f"distract-{d}", per_para),
                    "is_supporting": False,
                }
            )
        rows.append(
            {
                "question": f"Which route links the {tag} ledger to its archive?",
                "answer": f"the {tag} crossing",
                "dataset": dataset,
                "paragraphs": paragraphs,
            }
        )
    return rows


def teacher_info(tag: str, answer: str) -> str:
    return (
        f"The supporting passages for {tag} both name {answer} as the route in "
        f"question; the ledger entry and the archive note tie it to the same "
        f"registry line, which settles the identification."
    )


def teacher_cot(tag: str, answer: str) -> str:
    return (
        f"First, the opening sentence of each {tag} evidence paragraph names the "
        f"{tag} crossing. Second, the registry line links that crossing to the "
        f"archive. Therefore the answer is {answer}."
    )


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    GOLDENS.mkdir(parents=True, exist_ok=True)

    rows = build_raw_rows()
    with open(DATA / "instruct_raw.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    result = ingest_dataset(rows)
    corpus, records = result.corpus, result.records
    with open(DATA / "instruct_corpus.jsonl", "w") as fh:
        corpus.to_jsonl(fh)
    with open(DATA / "instruct_qa.jsonl", "w") as fh:
        qa_records_to_jsonl(records, fh)

    policy = InstructPolicy(seed=0)
    counter = ApproxTokenCounter()
    role_by_question = {
        f"Which route links the {tag} ledger to its archive?": role
        for tag, _, _, role in SPECS
    }
    tag_by_question = {
        f"Which route links the {tag} ledger to its archive?": tag for tag, _, _, _ in SPECS
    }
    threshold_check = {
        tag: (policy.context_threshold(dataset), role == "below_threshold")
        for tag, dataset, _, role in SPECS
    }
    for record in records:
        tag = tag_by_question[record.question]
        threshold, expect_below = threshold_check[tag]
        full = "\n\n".join(corpus[pid].text for pid in record.paragraph_ids)
        tokens = counter.count(full)
        if threshold is not None:
            actually_below = tokens < threshold
            assert actually_below == expect_below, (tag, tokens, threshold)

    prepared = preprocess(records, corpus, policy, counter, BuildReport())
    assert len(prepared) == 16, len(prepared)

    script_lines = []
    for item in prepared:
        record = item.record
        tag = tag_by_question[record.question]
        role = role_by_question[record.question]

        info = SHORT_RESPONSE if role == "extractor_teacher_short" else teacher_info(tag, record.answer)
        script_lines.append(
            {
                "key": mock_key(
                    INSTRUCT_EXTRACTOR_TEACHER,
                    {"content": item.supporting_text(corpus), "question": record.question},
                ),
                "response": info,
            }
        )
        if role == "extractor_judge_false":
            ext_judge = '{"status": "False"}'
        elif role == "extractor_judge_garbage":
            ext_judge = "hard to say whether this holds"
        else:
            ext_judge = '{"status": "True"}'
        script_lines.append(
            {
                "key": mock_key(
                    INSTRUCT_EXTRACTOR_JUDGE,
                    {"question": record.question, "info": info, "answer": record.answer},
                ),
                "response": ext_judge,
            }
        )

        cot = SHORT_RESPONSE if role == "cot_teacher_short" else teacher_cot(tag, record.answer)
        script_lines.append(
            {
                "key": mock_key(
                    INSTRUCT_COT_TEACHER,
                    {
                        "content": item.context_text(corpus),
                        "question": record.question,
                        "answer": record.answer,
                    },
                ),
                "response": cot,
            }
        )
        if role == "cot_judge_false":
            cot_judge = '{"status": "False"}'
        elif role == "cot_judge_garbage":
            cot_judge = "no verdict comes to mind"
        else:
            cot_judge = '{"status": "True"}'
        script_lines.append(
            {
                "key": mock_key(
                    INSTRUCT_COT_JUDGE,
                    {"question": record.question, "cot": cot, "answer": record.answer},
                ),
                "response": cot_judge,
            }
        )

    with open(DATA / "instruct_mock.jsonl", "w") as fh:
        for line in script_lines:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")

    backend = load_mock_script_path(DATA / "instruct_mock.jsonl")
    gateway = LlmGateway(backend, counter, sleep=lambda _: None)

    out, report = build_instruct_dataset(records, corpus, gateway, policy=policy, counter=counter)

    buf = io.StringIO()
    instruct_records_to_jsonl(out, buf)
    (GOLDENS / "instruct_reference.jsonl").write_text(buf.getvalue())
    (GOLDENS / "instruct_report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    )

    print(f"records out: {len(out)}")
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
