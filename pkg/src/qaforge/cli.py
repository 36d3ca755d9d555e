"""The ``forge`` command line: simulate, generate, validate, stats, split, eval.

Exit codes: 0 on success, 1 on validation/processing failure, 2 on usage
errors (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import attention, dataset, evaluate, generator, simulator
from .lexicon import load_lexicon
from .model import ForgeError
from .templates import load_templates


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers")
    try:
        r = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}") from None
    return r  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Generate, verify and evaluate temporally-grounded gameplay QA datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic gameplay sessions")
    p.add_argument("--config", help="simulator config JSON (default: packaged)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1, help="number of sessions")
    p.add_argument("--out", required=True, help="output sessions JSONL")
    p.add_argument("--duration-ms", type=int, help="override configured session length")

    p = sub.add_parser("generate", help="generate QA pairs from session logs")
    p.add_argument("--sessions", required=True, help="input sessions JSONL")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--templates", help="template pool JSON (default: packaged)")
    p.add_argument("--lexicon", help="lexicon JSON (default: packaged)")
    p.add_argument(
        "--max-duplicates",
        type=int,
        help="cap identical (question, answer) pairs before writing",
    )

    p = sub.add_parser("validate", help="replay the oracle over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--lexicon", help="lexicon JSON (default: packaged)")

    p = sub.add_parser("stats", help="dataset statistics report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sessions", help="sessions JSONL for per-clip event counts")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--csv", help="also write the report as CSV")

    p = sub.add_parser("split", help="assign train/valid/test splits per subset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ratios", type=_parse_ratios, default=(0.6, 0.2, 0.2))

    p = sub.add_parser("eval", help="score predictions or run trivial baselines")
    p.add_argument("--dataset", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preds", help="predictions JSONL {'id':..., 'answer':...}")
    group.add_argument(
        "--baseline",
        choices=["most-frequent"],
        help="score a built-in baseline instead of a prediction file",
    )
    p.add_argument("--out", help="write the accuracy report JSON here")
    p.add_argument("--preds-out", help="write baseline predictions here")

    p = sub.add_parser("attn-check", help="assert attention invariants on a fixture")
    p.add_argument("--fixture", required=True, help="fixture JSON")

    return parser


def _cmd_simulate(args) -> int:
    lexicon = load_lexicon()
    config = simulator.load_simulator_config(args.config, lexicon)
    if args.duration_ms is not None:
        from dataclasses import replace

        config = replace(config, duration_ms=args.duration_ms)
    sessions = simulator.simulate_sessions(config, args.seed, args.count, lexicon)
    simulator.write_sessions_jsonl(args.out, sessions)
    total_events = sum(len(s.events) for s in sessions)
    print(f"wrote {len(sessions)} sessions ({total_events} events) to {args.out}")
    return 0


def _cmd_generate(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    pool = load_templates(args.templates)
    sessions = simulator.ingest_log(args.sessions, lexicon)
    pairs, counters = generator.generate_dataset(sessions, lexicon, pool, args.seed)
    examples = dataset.examples_from_pairs(pairs)
    if args.max_duplicates is not None:
        before = len(examples)
        examples = dataset.cap_duplicates(examples, args.max_duplicates, args.seed)
        counters["capped_duplicates"] = before - len(examples)
    dataset.write_dataset(args.out, examples)
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counters.items()))
    print(f"wrote {len(examples)} examples to {args.out} ({summary})")
    return 0


def _cmd_validate(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    sessions = {s.id: s for s in simulator.ingest_log(args.sessions, lexicon)}
    examples = dataset.read_dataset(args.dataset)
    violations = dataset.validate_against_oracle(examples, sessions, lexicon)
    if violations:
        for v in violations[:50]:
            print(v, file=sys.stderr)
        if len(violations) > 50:
            print(f"... and {len(violations) - 50} more", file=sys.stderr)
        print(f"FAIL: {len(violations)}/{len(examples)} examples violate the oracle")
        return 1
    print(f"OK: all {len(examples)} examples agree with the oracle")
    return 0


def _cmd_stats(args) -> int:
    examples = dataset.read_dataset(args.dataset)
    sessions = None
    if args.sessions:
        lexicon = load_lexicon()
        sessions = {s.id: s for s in simulator.ingest_log(args.sessions, lexicon)}
    report = dataset.compute_stats(examples, sessions)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dataset.stats_to_csv(report))
    print(f"wrote stats for {report['total_examples']} examples to {args.out}")
    return 0


def _cmd_split(args) -> int:
    examples = dataset.read_dataset(args.dataset)
    split_examples = dataset.assign_splits(examples, args.ratios, args.seed)
    dataset.write_dataset(args.out, split_examples)
    from collections import Counter

    counts = Counter(ex.split for ex in split_examples)
    print(
        f"wrote {len(split_examples)} examples to {args.out} "
        f"(train={counts.get('train', 0)}, valid={counts.get('valid', 0)}, "
        f"test={counts.get('test', 0)})"
    )
    return 0


def _cmd_eval(args) -> int:
    examples = dataset.read_dataset(args.dataset)
    if args.baseline == "most-frequent":
        preds = evaluate.most_frequent_baseline(examples)
        if args.preds_out:
            evaluate.write_predictions(args.preds_out, preds)
    else:
        preds = evaluate.read_predictions(args.preds)
    report = evaluate.accuracy(preds, examples)
    report["random_guess_expectation"] = evaluate.random_guess_expectation(examples)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    return 1 if report["undefined"] else 0


def _cmd_attn_check(args) -> int:
    fixture = attention.load_fixture(args.fixture)
    results = attention.check_fixture(fixture)
    failed = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{status}: {name}{suffix}")
        if not ok:
            failed += 1
    return 1 if failed else 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "generate": _cmd_generate,
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "split": _cmd_split,
    "eval": _cmd_eval,
    "attn-check": _cmd_attn_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
