import json

import pytest

from duorag.cli import main

from conftest import DATA_DIR, GOLDEN_DIR

WILDCARD_LINES = [
    {"key": "extractor:*", "response": "global sketch of the evidence."},
    {"key": "cot_guidance:*", "response": "inspect each passage for the crossing."},
    {"key": "chunk_filter:*", "response": '{"status": "True"}'},
    {"key": "generator:*", "response": "the h0 crossing"},
]


def write_mock_script(path, lines=WILDCARD_LINES):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")
    return str(path)


def write_config(path, **overrides):
    config = {
        "corpus": str(DATA_DIR / "instruct_corpus.jsonl"),
        "qa": str(DATA_DIR / "instruct_qa.jsonl"),
        "chunk": {"chunk_size": 60},
        "retrieval": {"top_k": 3},
        "gateway": {"backend": "mock"},
        "embedder": {"backend": "hash", "dimension": 32},
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return str(path)


# --- ingest ---


def test_ingest_happy_path(tmp_path, capsys):
    out_corpus = tmp_path / "corpus.jsonl"
    out_qa = tmp_path / "qa.jsonl"
    code = main(
        [
            "ingest",
            "--in",
            str(DATA_DIR / "instruct_raw.jsonl"),
            "--out-corpus",
            str(out_corpus),
            "--out-qa",
            str(out_qa),
        ]
    )
    assert code == 0
    assert "ingested 20/20 records" in capsys.readouterr().out
    # ingest output matches the committed fixture byte for byte
    assert out_corpus.read_bytes() == (DATA_DIR / "instruct_corpus.jsonl").read_bytes()
    assert out_qa.read_bytes() == (DATA_DIR / "instruct_qa.jsonl").read_bytes()


def test_ingest_missing_input_exits_two(tmp_path, capsys):
    code = main(
        [
            "ingest",
            "--in",
            str(tmp_path / "nope.jsonl"),
            "--out-corpus",
            str(tmp_path / "c.jsonl"),
            "--out-qa",
            str(tmp_path / "q.jsonl"),
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


# --- ask ---


def test_ask_prints_answer(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    code = main(
        ["ask", "which crossing?", "--config", config, "--strategy", "EF", "--mock-script", mock]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.strip() == "the h0 crossing"
    assert "[EF]" in captured.err
    assert "llm calls" in captured.err


def test_ask_writes_trace_and_chunks(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    trace_path = tmp_path / "trace.jsonl"
    chunks_path = tmp_path / "chunks.jsonl"
    code = main(
        [
            "ask",
            "which crossing links the ledger to its archive?",
            "--config",
            config,
            "--strategy",
            "RB",
            "--top-k",
            "2",
            "--mock-script",
            mock,
            "--out",
            str(trace_path),
            "--dump-chunks",
            str(chunks_path),
        ]
    )
    assert code == 0
    trace = json.loads(trace_path.read_text())
    assert trace["strategy"] == "RB"
    assert trace["answer"] == "the h0 crossing"
    assert len(trace["hits"]) == 2
    first_chunk = json.loads(chunks_path.read_text().splitlines()[0])
    assert sorted(first_chunk) == ["id", "parent_id", "seq", "text"]
    capsys.readouterr()


def test_ask_dry_run_placeholder_answer(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    code = main(["ask", "which crossing?", "--config", config, "--dry-run"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "[dry-run]"


def test_ask_unknown_strategy_usage_error(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    with pytest.raises(SystemExit) as err:
        main(["ask", "q?", "--config", config, "--strategy", "NOPE"])
    assert err.value.code == 2
    capsys.readouterr()


def test_ask_mock_and_dry_run_conflict(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    with pytest.raises(SystemExit) as err:
        main(["ask", "q?", "--config", config, "--mock-script", mock, "--dry-run"])
    assert err.value.code == 2
    capsys.readouterr()


def test_ask_mock_backend_without_script_is_config_error(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    code = main(["ask", "q?", "--config", config])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_ask_unscripted_call_is_pipeline_failure(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    # script only the generator: an EF run dies at the extractor
    mock = write_mock_script(tmp_path / "mock.jsonl", [WILDCARD_LINES[3]])
    code = main(["ask", "q?", "--config", config, "--strategy", "EF", "--mock-script", mock])
    assert code == 1
    assert "unscripted" in capsys.readouterr().err


def test_bad_config_json_exits_two(tmp_path, capsys):
    bad = tmp_path / "config.json"
    bad.write_text("{not json")
    code = main(["ask", "q?", "--config", str(bad)])
    assert code == 2
    capsys.readouterr()


# --- eval ---


def run_eval(tmp_path, capsys, out_name, extra):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    out_dir = tmp_path / out_name
    code = main(
        ["eval", "--config", config, "--mock-script", mock, "--out", str(out_dir)] + extra
    )
    captured = capsys.readouterr()
    return code, out_dir, captured


def test_eval_writes_csv_and_table(tmp_path, capsys):
    code, out_dir, captured = run_eval(tmp_path, capsys, "run", ["--limit", "4"])
    assert code == 0
    csv_lines = (out_dir / "results.csv").read_text().splitlines()
    assert csv_lines[0] == "strategy,chunk_size,top_k,dataset,mean_f1,mean_gen_tokens,n"
    assert len(csv_lines) == 6  # header + all five strategies
    assert [line.split(",")[0] for line in csv_lines[1:]] == ["RB", "RL", "EXT", "FIL", "EF"]
    assert all(line.endswith(",4") for line in csv_lines[1:])
    table = (out_dir / "results.txt").read_text()
    assert table.splitlines()[0].split() == ["dataset", "grid", "RB", "RL", "EXT", "FIL", "EF"]
    assert "60*3" in table
    assert table in captured.out


def test_eval_grid_cross_product(tmp_path, capsys):
    code, out_dir, _ = run_eval(
        tmp_path,
        capsys,
        "run",
        ["--limit", "2", "--strategies", "RB,RL", "--grid", "60*2,60*3"],
    )
    assert code == 0
    csv_lines = (out_dir / "results.csv").read_text().splitlines()
    assert len(csv_lines) == 5
    assert csv_lines[1].startswith("RB,60,2,")
    assert csv_lines[2].startswith("RL,60,2,")
    assert csv_lines[3].startswith("RB,60,3,")
    assert csv_lines[4].startswith("RL,60,3,")


def test_eval_rerun_identical_csv_bytes(tmp_path, capsys):
    args = ["--limit", "4", "--strategies", "RB,FIL"]
    code1, out1, _ = run_eval(tmp_path, capsys, "run1", args)
    code2, out2, _ = run_eval(tmp_path, capsys, "run2", args)
    assert code1 == code2 == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
    assert (out1 / "results.txt").read_bytes() == (out2 / "results.txt").read_bytes()


def test_eval_dataset_filter(tmp_path, capsys):
    code, out_dir, _ = run_eval(
        tmp_path, capsys, "run", ["--dataset", "qasper", "--strategies", "RB"]
    )
    assert code == 0
    line = (out_dir / "results.csv").read_text().splitlines()[1]
    assert line.split(",")[3] == "qasper"
    assert line.endswith(",4")  # four qasper records in the fixture


def test_eval_unknown_strategy_name(tmp_path, capsys):
    code, _, captured = run_eval(tmp_path, capsys, "run", ["--strategies", "RB,XX"])
    assert code == 2
    assert "unknown strategy" in captured.err


def test_eval_no_matching_records(tmp_path, capsys):
    code, _, captured = run_eval(tmp_path, capsys, "run", ["--dataset", "missing-set"])
    assert code == 2
    assert "no QA records" in captured.err


def test_eval_malformed_grid(tmp_path, capsys):
    code, _, captured = run_eval(tmp_path, capsys, "run", ["--grid", "60:3"])
    assert code == 2
    assert "bad grid point" in captured.err


# --- build-instruct ---


def test_build_instruct_matches_reference(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    out_dir = tmp_path / "instruct"
    code = main(
        [
            "build-instruct",
            "--config",
            config,
            "--mock-script",
            str(DATA_DIR / "instruct_mock.jsonl"),
            "--out",
            str(out_dir),
        ]
    )
    assert code == 0
    assert "built 94 records" in capsys.readouterr().out
    got = (out_dir / "instruct.jsonl").read_bytes()
    assert got == (GOLDEN_DIR / "instruct_reference.jsonl").read_bytes()
    report = (out_dir / "report.json").read_bytes()
    assert report == (GOLDEN_DIR / "instruct_report.json").read_bytes()


def test_build_instruct_kind_subset(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    out_dir = tmp_path / "instruct"
    code = main(
        [
            "build-instruct",
            "--config",
            config,
            "--kinds",
            "task_oriented",
            "--mock-script",
            mock,
            "--out",
            str(out_dir),
        ]
    )
    assert code == 0
    assert "task_oriented=16" in capsys.readouterr().out
    lines = (out_dir / "instruct.jsonl").read_text().splitlines()
    assert len(lines) == 16
    assert all(json.loads(line)["kind"] == "task_oriented" for line in lines)


def test_build_instruct_seed_changes_sampled_context(tmp_path, capsys):
    config0 = write_config(tmp_path / "c0.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")

    def run(seed, name):
        out_dir = tmp_path / name
        code = main(
            [
                "build-instruct",
                "--config",
                config0,
                "--kinds",
                "task_oriented",
                "--seed",
                str(seed),
                "--mock-script",
                mock,
                "--out",
                str(out_dir),
            ]
        )
        assert code == 0
        return (out_dir / "instruct.jsonl").read_bytes()

    assert run(0, "s0") == run(0, "s0b")
    assert run(0, "s0c") != run(1, "s1")
    capsys.readouterr()


def test_build_instruct_unknown_kind(tmp_path, capsys):
    config = write_config(tmp_path / "config.json")
    mock = write_mock_script(tmp_path / "mock.jsonl")
    code = main(
        [
            "build-instruct",
            "--config",
            config,
            "--kinds",
            "task_oriented,banana",
            "--mock-script",
            mock,
            "--out",
            str(tmp_path / "x"),
        ]
    )
    assert code == 2
    assert "unknown instruct kinds" in capsys.readouterr().err
