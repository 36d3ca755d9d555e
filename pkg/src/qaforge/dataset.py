"""Dataset assembly: serialization, duplicate capping, splits and statistics.

Dataset files are JSON Lines, one example per line, in canonical key
order, so that identical inputs always serialize byte-identically:

    {"id":0,"q":"...","a":"...","subset":"HT","qtype":"counting",
     "session":3,"clip":[1000,5500],"chunk":{...},"template":"cnt-jump-c1",
     "split":"train"}

``split`` is present only once splits have been assigned.  ``id`` and
``template`` exist so predictions can reference examples and questions
stay traceable to their surface realization.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .generator import QAPair
from .model import (
    Clip,
    ConfigError,
    GameplaySession,
    IntegrityError,
    LogParseError,
    QuestionType,
    Subset,
    chunk_from_obj,
    chunk_to_obj,
    dumps_canonical,
    events_in,
)
from .seeding import SeedLike, make_rng

SPLITS = ("train", "valid", "test")

_PUNCT_RE = re.compile(r"[?.,!]")


@dataclass(frozen=True)
class Example:
    """A QA pair with a stable id and (optionally) a split assignment."""

    id: int
    pair: QAPair
    split: Optional[str] = None


def examples_from_pairs(pairs: Sequence[QAPair]) -> list[Example]:
    return [Example(id=i, pair=p) for i, p in enumerate(pairs)]


# --------------------------------------------------------------------------- #
# Serialization
# --------------------------------------------------------------------------- #


def example_to_obj(ex: Example) -> dict:
    pair = ex.pair
    obj = {
        "id": ex.id,
        "q": pair.question,
        "a": pair.answer,
        "subset": pair.subset.value,
        "qtype": pair.qtype.value,
        "session": pair.session_id,
        "clip": [pair.clip.start_ms, pair.clip.end_ms],
        "chunk": chunk_to_obj(pair.chunk),
        "template": pair.template_id,
    }
    if ex.split is not None:
        obj["split"] = ex.split
    return obj


def example_to_line(ex: Example) -> str:
    return dumps_canonical(example_to_obj(ex))


def example_from_obj(obj: object, line_no: Optional[int] = None) -> Example:
    if not isinstance(obj, dict):
        raise LogParseError("example is not an object", line_no)
    for key in ("id", "q", "a", "subset", "qtype", "session", "clip", "chunk", "template"):
        if key not in obj:
            raise LogParseError(f"example missing field {key!r}", line_no)
    clip_arr = obj["clip"]
    if not (isinstance(clip_arr, list) and len(clip_arr) == 2):
        raise LogParseError("clip must be [start, end]", line_no)
    chunk = chunk_from_obj(obj["chunk"], line_no)
    if chunk.target_event_id is None:
        raise LogParseError("chunk missing 'target' provenance", line_no)
    try:
        subset = Subset.parse(obj["subset"])
        qtype = QuestionType.parse(obj["qtype"])
    except LogParseError as exc:
        raise LogParseError(str(exc), line_no) from None
    if qtype is not chunk.qtype:
        raise LogParseError("example qtype disagrees with its chunk", line_no)
    clip = Clip(
        session_id=obj["session"],
        start_ms=clip_arr[0],
        end_ms=clip_arr[1],
        target_event_id=chunk.target_event_id,
    )
    split = obj.get("split")
    if split is not None and split not in SPLITS:
        raise LogParseError(f"unknown split {split!r}", line_no)
    pair = QAPair(
        question=obj["q"],
        answer=obj["a"],
        chunk=chunk,
        subset=subset,
        qtype=qtype,
        clip=clip,
        template_id=obj["template"],
        session_id=obj["session"],
    )
    return Example(id=obj["id"], pair=pair, split=split)


def write_dataset(path: str, examples: Sequence[Example]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(example_to_line(ex))
            fh.write("\n")


def read_dataset(path: str) -> list[Example]:
    examples = []
    seen: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"invalid JSON: {exc.msg}", line_no) from None
            ex = example_from_obj(obj, line_no)
            if ex.id in seen:
                raise LogParseError(f"duplicate example id {ex.id}", line_no)
            seen.add(ex.id)
            examples.append(ex)
    return examples


# --------------------------------------------------------------------------- #
# Balancing and splitting
# --------------------------------------------------------------------------- #


def cap_duplicates(
    examples: Sequence[Example], max_count: int, seed: SeedLike
) -> list[Example]:
    """Keep at most ``max_count`` examples per identical (question, answer).

    Survivors are a seeded uniform sample of each group; relative order
    (and ids) are preserved, which also makes the operation idempotent.
    """
    if max_count < 1:
        raise ConfigError("max_count must be >= 1")
    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for idx, ex in enumerate(examples):
        groups[(ex.pair.question, ex.pair.answer)].append(idx)
    rng = make_rng(seed)
    keep: set[int] = set()
    for key, idxs in groups.items():
        if len(idxs) <= max_count:
            keep.update(idxs)
        else:
            picked = rng.choice(len(idxs), size=max_count, replace=False)
            keep.update(idxs[int(i)] for i in picked)
    return [ex for idx, ex in enumerate(examples) if idx in keep]


def split_counts(n: int, ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    """Train/valid/test sizes for a subset of ``n`` examples.

    ``train`` is floored; the remainder goes to valid/test with valid
    taking the ceiling of its share.  The tiny epsilon shields the floor
    from representation error when the exact product is an integer.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios sum to {sum(ratios)}, expected 1")
    if any(r < 0 for r in ratios):
        raise ConfigError("split ratios must be non-negative")
    eps = 1e-9
    train = int(math.floor(ratios[0] * n + eps))
    rest = n - train
    denom = ratios[1] + ratios[2]
    if denom <= 0:
        return train + rest, 0, 0  # degenerate: everything is train
    test = int(math.floor(rest * (ratios[2] / denom) + eps))
    valid = rest - test
    return train, valid, test


def assign_splits(
    examples: Sequence[Example],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: SeedLike = 0,
) -> list[Example]:
    """Assign train/valid/test per subset by seeded shuffle.

    Splits are drawn independently inside each subset (NT, ET, HT) at the
    example level; clips from one session may land in different splits,
    which ``compute_stats`` reports as session leakage.
    """
    rng = make_rng(seed)
    assignment: dict[int, str] = {}
    for subset in Subset:
        positions = [i for i, ex in enumerate(examples) if ex.pair.subset is subset]
        n = len(positions)
        if n == 0:
            continue
        n_train, n_valid, n_test = split_counts(n, ratios)
        order = [positions[int(i)] for i in rng.permutation(n)]
        for pos in order[:n_train]:
            assignment[pos] = "train"
        for pos in order[n_train : n_train + n_valid]:
            assignment[pos] = "valid"
        for pos in order[n_train + n_valid :]:
            assignment[pos] = "test"
    return [
        replace(ex, split=assignment.get(i, ex.split)) for i, ex in enumerate(examples)
    ]


# --------------------------------------------------------------------------- #
# Statistics
# --------------------------------------------------------------------------- #


def question_tokens(question: str) -> list[str]:
    """Vocabulary tokenization: lowercase, punctuation-stripped, whitespace split."""
    return _PUNCT_RE.sub("", question.lower()).split()


# --------------------------------------------------------------------------- #
# Oracle replay
# --------------------------------------------------------------------------- #


def validate_against_oracle(
    examples: Sequence[Example],
    sessions: Mapping[int, GameplaySession],
    lexicon,
) -> list[str]:
    """Replay the oracle over every example; return violation descriptions.

    An example is sound when the oracle's answer set for its chunk is the
    singleton containing exactly its recorded answer and the clip really
    contains its target event.
    """
    from . import oracle
    from .model import DanglingReferenceError

    violations = []
    event_maps: dict[int, dict[int, object]] = {}
    for ex in examples:
        session = sessions.get(ex.pair.session_id)
        if session is None:
            raise IntegrityError(
                f"example {ex.id} references unknown session {ex.pair.session_id}"
            )
        if session.id not in event_maps:
            event_maps[session.id] = {e.id: e for e in session.events}
        target = event_maps[session.id].get(ex.pair.clip.target_event_id)
        if target is None:
            violations.append(f"example {ex.id}: target event missing from session")
            continue
        if not ex.pair.clip.start_ms <= target.time_ms <= ex.pair.clip.end_ms:
            violations.append(f"example {ex.id}: target event outside its clip")
            continue
        try:
            answers = oracle.answer(ex.pair.chunk, ex.pair.clip, session, lexicon)
        except DanglingReferenceError as exc:
            violations.append(f"example {ex.id}: {exc}")
            continue
        if len(answers) != 1:
            violations.append(
                f"example {ex.id}: oracle answer set {sorted(answers)!r} is not a singleton"
            )
        elif answers != {ex.pair.answer}:
            violations.append(
                f"example {ex.id}: oracle says {next(iter(answers))!r}, "
                f"dataset says {ex.pair.answer!r}"
            )
    return violations


def _event_bucket(ex: Example) -> str:
    chunk = ex.pair.chunk
    if chunk.qtype is QuestionType.STATE:
        return chunk.probe or "state"
    return chunk.predicate.value  # type: ignore[union-attr]


def compute_stats(
    examples: Sequence[Example],
    sessions: Optional[Mapping[int, GameplaySession]] = None,
) -> dict:
    """Aggregate counts per subset plus corpus-level figures.

    ``sessions`` enables the mean-events-per-clip figure; a clip whose
    session id cannot be resolved raises ``IntegrityError``.
    """
    subsets: dict = {}
    for subset in Subset:
        subsets[subset.value] = {
            "examples": 0,
            "question_types": Counter(),
            "event_types": Counter(),
            "answer_classes": Counter(),
            "vocabulary": set(),
        }
    unique_qa = set()
    events_total = 0
    split_sessions: dict[int, set[str]] = defaultdict(set)
    for ex in examples:
        bucket = subsets[ex.pair.subset.value]
        bucket["examples"] += 1
        bucket["question_types"][ex.pair.qtype.value] += 1
        bucket["event_types"][_event_bucket(ex)] += 1
        bucket["answer_classes"][ex.pair.answer] += 1
        bucket["vocabulary"].update(question_tokens(ex.pair.question))
        unique_qa.add((ex.pair.question, ex.pair.answer))
        if sessions is not None:
            session = sessions.get(ex.pair.session_id)
            if session is None:
                raise IntegrityError(
                    f"example {ex.id} references unknown session {ex.pair.session_id}"
                )
            events_total += len(events_in(ex.pair.clip, session))
        if ex.split is not None:
            split_sessions[ex.pair.session_id].add(ex.split)

    report: dict = {
        "total_examples": len(examples),
        "unique_qa_pairs": len(unique_qa),
        "mean_events_per_clip": (
            round(events_total / len(examples), 6) if sessions is not None and examples else None
        ),
        "subsets": {},
        "session_leakage": {
            "sessions_spanning_splits": sum(
                1 for splits in split_sessions.values() if len(splits) > 1
            )
            if split_sessions
            else 0,
        },
    }
    for name, bucket in subsets.items():
        report["subsets"][name] = {
            "examples": bucket["examples"],
            "question_types": dict(sorted(bucket["question_types"].items())),
            "event_types": dict(sorted(bucket["event_types"].items())),
            "answer_classes": dict(sorted(bucket["answer_classes"].items())),
            "question_vocabulary_size": len(bucket["vocabulary"]),
        }
    return report


def stats_to_csv(report: dict) -> str:
    """Flatten the stats report to section,subset,key,value rows."""
    lines = ["section,subset,key,value"]
    lines.append(f"corpus,,total_examples,{report['total_examples']}")
    lines.append(f"corpus,,unique_qa_pairs,{report['unique_qa_pairs']}")
    mean_epc = report["mean_events_per_clip"]
    lines.append(f"corpus,,mean_events_per_clip,{'' if mean_epc is None else mean_epc}")
    lines.append(
        "corpus,,sessions_spanning_splits,"
        f"{report['session_leakage']['sessions_spanning_splits']}"
    )
    for subset, bucket in report["subsets"].items():
        lines.append(f"examples,{subset},examples,{bucket['examples']}")
        lines.append(
            f"vocabulary,{subset},question_vocabulary_size,"
            f"{bucket['question_vocabulary_size']}"
        )
        for section in ("question_types", "event_types", "answer_classes"):
            for key, count in bucket[section].items():
                lines.append(f"{section},{subset},{key},{count}")
    return "\n".join(lines) + "\n"
