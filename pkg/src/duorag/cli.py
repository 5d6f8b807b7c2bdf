"""Command-line interface.

    duorag ingest          raw QA rows -> corpus.jsonl + qa.jsonl
    duorag ask             answer one question with a chosen strategy
    duorag eval            run a strategy grid and write CSV + table
    duorag build-instruct  construct instruction-tuning records

Exit codes: 0 success, 1 pipeline failure, 2 usage/config/file errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chunking import chunk_corpus, dump_chunks
from .config import AppConfig, load_config, make_embedder, make_gateway, make_pair_scorer
from .corpus import (
    Corpus,
    ingest_dataset,
    qa_records_from_jsonl,
    qa_records_to_jsonl,
    read_jsonl,
)
from .errors import ConfigError, DuoragError
from .evaluate import ExperimentRunner, parse_grid_point, results_to_csv, results_to_table
from .gateway import DryRunBackend
from .instruct import ALL_KINDS, InstructPolicy, build_instruct_dataset, instruct_records_to_jsonl
from .pipeline import Pipeline, Strategy, StrategyConfig, dump_traces
from .retrieval import build_index

STRATEGY_NAMES = [s.value for s in Strategy]


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--mock-script", help="JSONL of scripted responses; forces the mock backend")
    group.add_argument(
        "--dry-run", action="store_true", help="render prompts against a placeholder backend"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duorag", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="normalize and deduplicate raw QA rows")
    p_ingest.add_argument("--in", dest="input", required=True, help="raw JSONL rows")
    p_ingest.add_argument("--out-corpus", required=True)
    p_ingest.add_argument("--out-qa", required=True)
    p_ingest.add_argument("--dataset", default="", help="dataset name for rows that lack one")

    p_ask = sub.add_parser("ask", help="answer one question")
    p_ask.add_argument("question")
    p_ask.add_argument("--config", required=True)
    p_ask.add_argument("--strategy", choices=STRATEGY_NAMES, default="EF")
    p_ask.add_argument("--chunk-size", type=int)
    p_ask.add_argument("--top-k", type=int)
    p_ask.add_argument("--seed", type=int)
    p_ask.add_argument("--out", help="write the run trace as JSONL")
    p_ask.add_argument("--dump-chunks", help="write the chunk table as JSONL")
    _add_backend_flags(p_ask)

    p_eval = sub.add_parser("eval", help="run a strategy grid over a question set")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--dataset", default="", help="restrict to one dataset name")
    p_eval.add_argument(
        "--strategies", default=",".join(STRATEGY_NAMES), help="comma list, default all"
    )
    p_eval.add_argument("--grid", default="", help="comma list of CHUNK*TOPK points, e.g. 200*7")
    p_eval.add_argument("--limit", type=int, default=0, help="evaluate at most N questions")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--out", required=True, help="output directory")
    _add_backend_flags(p_eval)

    p_build = sub.add_parser("build-instruct", help="construct instruction-tuning records")
    p_build.add_argument("--config", required=True)
    p_build.add_argument("--kinds", default=",".join(ALL_KINDS), help="comma list, default all")
    p_build.add_argument("--seed", type=int)
    p_build.add_argument("--out", required=True, help="output directory")
    _add_backend_flags(p_build)

    return parser


def _load_corpus(path: str) -> Corpus:
    if not path:
        raise ConfigError("config has no corpus path")
    with open(path, encoding="utf-8") as fh:
        return Corpus.from_jsonl(fh)


def _load_qa(path: str):
    if not path:
        raise ConfigError("config has no qa path")
    with open(path, encoding="utf-8") as fh:
        return qa_records_from_jsonl(fh)


def _effective_config(args: argparse.Namespace) -> AppConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = AppConfig(**{**config.__dict__, "seed": args.seed})
    return config


def cmd_ingest(args: argparse.Namespace) -> int:
    with open(args.input, encoding="utf-8") as fh:
        rows = read_jsonl(fh)
    result = ingest_dataset(rows, default_dataset=args.dataset)
    with open(args.out_corpus, "w", encoding="utf-8") as fh:
        result.corpus.to_jsonl(fh)
    with open(args.out_qa, "w", encoding="utf-8") as fh:
        qa_records_to_jsonl(result.records, fh)
    report = result.report
    print(
        f"ingested {report.records_kept}/{report.records_total} records, "
        f"{report.paragraphs_kept} paragraphs "
        f"({report.duplicates_merged} duplicates merged, "
        f"{len(report.empty_paragraphs_skipped)} empty skipped)"
    )
    return 0


def cmd_ask(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    corpus = _load_corpus(config.corpus)
    chunk_size = args.chunk_size or config.chunk_size
    top_k = args.top_k or config.top_k
    strategy_config = StrategyConfig(
        strategy=Strategy(args.strategy),
        chunk_size=chunk_size,
        top_k=top_k,
        coarse_n=config.coarse_n,
    )

    chunks = chunk_corpus(corpus, config.chunk_policy(chunk_size))
    if args.dump_chunks:
        with open(args.dump_chunks, "w", encoding="utf-8") as fh:
            dump_chunks(chunks, fh)
    embedder = make_embedder(config)
    index = build_index(chunks, embedder)
    gateway = make_gateway(config, mock_script=args.mock_script, dry_run=args.dry_run)
    pipeline = Pipeline(corpus, index, make_pair_scorer(config, embedder), gateway, config.pipeline)

    trace = pipeline.run_question(args.question, strategy_config)
    print(trace.answer)
    print(
        f"[{args.strategy}] {trace.llm_call_count} llm calls, "
        f"{trace.generator_input_tokens} generator input tokens",
        file=sys.stderr,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_traces([trace], fh)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    corpus = _load_corpus(config.corpus)
    records = _load_qa(config.qa)
    if args.dataset:
        records = [r for r in records if r.dataset == args.dataset]
    if args.limit > 0:
        records = records[: args.limit]
    if not records:
        raise ConfigError("no QA records to evaluate")

    strategies = []
    for name in args.strategies.split(","):
        name = name.strip()
        if name not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {name!r}, expected one of {STRATEGY_NAMES}")
        strategies.append(Strategy(name))

    if args.grid:
        try:
            points = [parse_grid_point(p) for p in args.grid.split(",")]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        points = [(config.chunk_size, config.top_k)]
    grid = [
        StrategyConfig(strategy=s, chunk_size=cs, top_k=k, coarse_n=config.coarse_n)
        for cs, k in points
        for s in strategies
    ]

    embedder = make_embedder(config)
    gateway = make_gateway(config, mock_script=args.mock_script, dry_run=args.dry_run)
    runner = ExperimentRunner(
        corpus,
        embedder,
        make_pair_scorer(config, embedder),
        gateway,
        options=config.pipeline,
        chunk_policy_factory=config.chunk_policy,
        jobs=args.jobs,
    )
    results = runner.run_experiment(records, grid, dataset=args.dataset)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_text = results_to_csv(results)
    table_text = results_to_table(results)
    (out_dir / "results.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "results.txt").write_text(table_text, encoding="utf-8")
    print(table_text, end="")
    print(f"wrote {out_dir / 'results.csv'}", file=sys.stderr)
    return 0


def cmd_build_instruct(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    corpus = _load_corpus(config.corpus)
    records = _load_qa(config.qa)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    unknown = set(kinds) - set(ALL_KINDS)
    if unknown:
        raise ConfigError(f"unknown instruct kinds: {sorted(unknown)}")

    gateway = make_gateway(config, mock_script=args.mock_script, dry_run=args.dry_run)
    if isinstance(gateway.backend, DryRunBackend):
        # a dry run still exercises rendering but judges default-reject,
        # so report it rather than writing an empty dataset silently
        print("note: dry-run backend answers every judge with a placeholder", file=sys.stderr)
    policy = InstructPolicy(seed=config.seed)
    built, report = build_instruct_dataset(records, corpus, gateway, policy, kinds=kinds)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "instruct.jsonl", "w", encoding="utf-8") as fh:
        instruct_records_to_jsonl(built, fh)
    (out_dir / "report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    kept = ", ".join(f"{kind}={n}" for kind, n in sorted(report.kept_by_kind.items())) or "nothing"
    print(f"built {len(built)} records ({kept}) from {report.records_in} inputs")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "ingest": cmd_ingest,
        "ask": cmd_ask,
        "eval": cmd_eval,
        "build-instruct": cmd_build_instruct,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DuoragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
