"""Accuracy metric and trivial baselines over the test split."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from typing import Mapping, Optional, Sequence

from .dataset import Example
from .model import IntegrityError, LogParseError, QuestionType, Subset

_SUBSET_COLUMNS = [s.value for s in Subset] + ["ALL"]


def read_predictions(path: str) -> dict[int, str]:
    """Read a JSONL prediction file: {"id": ..., "answer": "..."} per line."""
    preds: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"invalid JSON: {exc.msg}", line_no) from None
            if not isinstance(obj, dict) or "id" not in obj or "answer" not in obj:
                raise LogParseError("prediction needs 'id' and 'answer'", line_no)
            if obj["id"] in preds:
                raise LogParseError(f"duplicate prediction for id {obj['id']}", line_no)
            preds[obj["id"]] = obj["answer"]
    return preds


def write_predictions(path: str, preds: Mapping[int, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex_id in sorted(preds):
            fh.write(json.dumps({"id": ex_id, "answer": preds[ex_id]}, separators=(",", ":")))
            fh.write("\n")


def _test_split(examples: Sequence[Example]) -> list[Example]:
    return [ex for ex in examples if ex.split == "test"]


def accuracy(preds: Mapping[int, str], examples: Sequence[Example]) -> dict:
    """Exact-match accuracy over the test split, micro-averaged.

    Every prediction id must resolve to a test example.  Test examples
    without a prediction count as wrong and are flagged in the report.
    Empty denominators yield ``None`` ("undefined") instead of a number.
    """
    test = _test_split(examples)
    by_id = {ex.id: ex for ex in test}
    unknown = [pid for pid in preds if pid not in by_id]
    if unknown:
        raise IntegrityError(
            f"predictions reference {len(unknown)} ids outside the test split "
            f"(first: {unknown[0]!r})"
        )
    totals: Counter = Counter()
    correct: Counter = Counter()
    missing = 0
    for ex in test:
        keys = [("subset", ex.pair.subset.value), ("qtype", ex.pair.qtype.value), ("all", "ALL")]
        predicted = preds.get(ex.id)
        if predicted is None:
            missing += 1
        for key in keys:
            totals[key] += 1
            if predicted == ex.pair.answer:
                correct[key] += 1

    def ratio(key: tuple) -> Optional[float]:
        return correct[key] / totals[key] if totals[key] else None

    report = {
        "subsets": {
            name: ratio(("all", "ALL")) if name == "ALL" else ratio(("subset", name))
            for name in _SUBSET_COLUMNS
        },
        "question_types": {
            qt.value: ratio(("qtype", qt.value)) for qt in QuestionType
        },
        "counts": {
            "test_examples": len(test),
            "correct": correct[("all", "ALL")],
            "missing_predictions": missing,
        },
        "undefined": len(test) == 0,
    }
    return report


def most_frequent_baseline(examples: Sequence[Example]) -> dict[int, str]:
    """Predict each subset's modal train answer for its test examples.

    Ties break lexicographically (smallest answer string wins).
    """
    train = [ex for ex in examples if ex.split == "train"]
    if not train:
        raise IntegrityError("baseline needs a non-empty train split")
    by_subset: dict[str, Counter] = defaultdict(Counter)
    for ex in train:
        by_subset[ex.pair.subset.value][ex.pair.answer] += 1
    modal: dict[str, str] = {}
    for subset, counts in by_subset.items():
        top = max(counts.values())
        modal[subset] = min(a for a, c in counts.items() if c == top)
    preds = {}
    for ex in _test_split(examples):
        subset = ex.pair.subset.value
        if subset not in modal:
            raise IntegrityError(
                f"subset {subset} has test examples but no train examples"
            )
        preds[ex.id] = modal[subset]
    return preds


def random_guess_expectation(examples: Sequence[Example]) -> dict[str, Optional[float]]:
    """Expected accuracy of a uniform guess over each subset's answer support.

    Computed analytically as 1 / (number of distinct answers occurring in
    the subset's test split); no sampling involved.
    """
    test = _test_split(examples)
    if not test:
        raise IntegrityError("random-guess expectation needs a non-empty test split")
    support: dict[str, set[str]] = defaultdict(set)
    for ex in test:
        support[ex.pair.subset.value].add(ex.pair.answer)
    out: dict[str, Optional[float]] = {}
    for subset in Subset:
        answers = support.get(subset.value)
        out[subset.value] = 1.0 / len(answers) if answers else None
    all_answers = set().union(*support.values())
    out["ALL"] = 1.0 / len(all_answers)
    return out
