"""QA-pair generation: chunk formation, template realization, pipeline.

The flow per target event mirrors the clip pipeline end to end: sample a
clip around the target, form semantic chunks (event-centric holes,
counting patterns, state probes, each optionally bound to an in-clip
reference event by a temporal constraint), reject anything whose answer
would not be clear and unique, then realize a seeded template choice.

Rejection rules enforced here rather than by the oracle alone:

* an unconstrained event-centric chunk is dropped when the clip holds
  another event of the same type (type-level distractor), so NT stays
  distractor-free;
* constraints are only attached when their reference pattern matches
  exactly one clip event and the target itself survives the constraint;
* counting chunks are dropped when the count exceeds the lexicon's
  counting cap.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import oracle
from .clips import classify_subset, sample_clip
from .lexicon import Lexicon
from .model import (
    Clip,
    ConsistencyError,
    CoverageError,
    DanglingReferenceError,
    Event,
    EventPattern,
    EventType,
    GameplaySession,
    LexiconError,
    MIN_CLIP_MS,
    MarioState,
    QuestionType,
    Relation,
    Role,
    ROLE_ORDER,
    SemanticChunk,
    Subset,
    TemporalConstraint,
    UnsampleableError,
    WHEN_TOLERANCE_MS,
    PROBE_MARIO_STATE,
    PROBE_STAGE_TYPE,
    events_in,
    state_at,
    states_overlapping,
)
from .seeding import SeedLike, make_rng, spawn
from .templates import Template, TemplatePool, render_surface, select_template


@dataclass(frozen=True)
class QAPair:
    """One generated example with full provenance back to its clip."""

    question: str
    answer: str
    chunk: SemanticChunk
    subset: Subset
    qtype: QuestionType
    clip: Clip
    template_id: str
    session_id: int


@dataclass(frozen=True)
class GenerationLimits:
    """Per-target emission caps keeping the candidate space bounded.

    The defaults lean towards event-centric questions: counting and state
    chunks regenerate on every overlapping clip, so they get tighter caps
    (and state probes a per-target gate) to keep the corpus
    event-centric-heavy with only a small state share.
    """

    constraints_per_event_chunk: int = 5
    counting_types_per_clip: int = 1
    constraints_per_counting_chunk: int = 1
    state_constraints_per_clip: int = 1
    state_probe_prob: float = 0.1


def reference_pattern(ev: Event, lexicon: Lexicon) -> EventPattern:
    """Canonical pattern used when this event anchors a temporal clause."""
    ref_role = lexicon.schema(ev.etype).reference
    if ref_role is not None and ref_role in ev.args:
        return EventPattern(ev.etype, {ref_role: ev.args[ref_role]})
    return EventPattern(ev.etype, {})


def _unique_references(
    clip: Clip, session: GameplaySession, lexicon: Lexicon
) -> list[tuple[Event, EventPattern]]:
    """Clip events whose canonical pattern matches only themselves.

    Ambiguous references are excluded up front: a clause like "after
    killing Goomba" must point at one event or the answer stops being
    well defined.
    """
    refs = []
    for ev in events_in(clip, session):
        pattern = reference_pattern(ev, lexicon)
        if len(oracle.match_events(pattern, clip, session)) == 1:
            refs.append((ev, pattern))
    return refs


def _survives(target: Event, relation: Relation, ref: Event) -> bool:
    if relation is Relation.AFTER:
        return target.time_ms > ref.time_ms
    if relation is Relation.BEFORE:
        return target.time_ms < ref.time_ms
    return abs(target.time_ms - ref.time_ms) <= WHEN_TOLERANCE_MS


def _take(rng: np.random.Generator, items: Sequence, k: int) -> list:
    """Seeded choice of up to k items, preserving enumeration order."""
    if len(items) <= k:
        return list(items)
    picked = sorted(int(i) for i in rng.permutation(len(items))[:k])
    return [items[i] for i in picked]


def form_chunks(
    target: Event,
    clip: Clip,
    session: GameplaySession,
    lexicon: Lexicon,
    pool: TemplatePool,
    seed: SeedLike,
    limits: Optional[GenerationLimits] = None,
) -> list[SemanticChunk]:
    """All candidate chunks for one (target, clip) pair, in deterministic order."""
    limits = limits or GenerationLimits()
    rng = make_rng(seed)
    window = events_in(clip, session)
    if not any(e.id == target.id for e in window):
        raise ConsistencyError(f"target event {target.id} is not inside the clip")
    refs = _unique_references(clip, session, lexicon)
    chunks: list[SemanticChunk] = []

    # ---- event-centric: one hole per filled role of the target ---- #
    schema = lexicon.schema(target.etype)
    for hole in ROLE_ORDER:
        if hole not in target.args:
            continue
        mandatory_rest = tuple(r for r in schema.mandatory if r is not hole)
        arg_choices: list[tuple[Role, ...]] = [mandatory_rest]
        if mandatory_rest:
            arg_choices.append(())
        base = None
        for choice in arg_choices:
            candidate = SemanticChunk(
                qtype=QuestionType.EVENT_CENTRIC,
                predicate=target.etype,
                args={r: target.args[r] for r in choice},
                hole=hole,
                target_event_id=target.id,
                answer_token=target.args[hole],
            )
            if pool.matching(candidate):
                base = candidate
                break
        if base is None:
            continue
        chunks.append(base)
        candidates = []
        for rev, pattern in refs:
            if rev.id == target.id:
                continue
            for relation in (Relation.AFTER, Relation.BEFORE, Relation.WHEN):
                if _survives(target, relation, rev):
                    candidates.append(TemporalConstraint(relation, pattern))
        for constraint in _take(rng, candidates, limits.constraints_per_event_chunk):
            chunks.append(
                SemanticChunk(
                    qtype=QuestionType.EVENT_CENTRIC,
                    predicate=base.predicate,
                    args=dict(base.args),
                    hole=hole,
                    constraint=constraint,
                    target_event_id=target.id,
                    answer_token=target.args[hole],
                )
            )

    # ---- counting: a sample of the event types present in the clip ---- #
    present = [et for et in EventType if any(e.etype is et for e in window)]
    for etype in _take(rng, present, limits.counting_types_per_clip):
        variants: list[dict[Role, str]] = [{}]
        ref_role = lexicon.schema(etype).reference
        if ref_role is not None:
            values = []
            for e in window:
                if e.etype is etype and ref_role in e.args and e.args[ref_role] not in values:
                    values.append(e.args[ref_role])
            for value in _take(rng, values, 1):
                variants.append({ref_role: value})
        for args in variants:
            pattern = EventPattern(etype, args)
            matches = oracle.match_events(pattern, clip, session)
            if len(matches) <= lexicon.max_count:
                chunks.append(
                    SemanticChunk(
                        qtype=QuestionType.COUNTING,
                        predicate=etype,
                        args=args,
                        target_event_id=target.id,
                        answer_token=len(matches),
                    )
                )
            constraint_cands = []
            for rev, rpat in refs:
                for relation in (Relation.AFTER, Relation.BEFORE, Relation.WHEN):
                    constraint_cands.append(TemporalConstraint(relation, rpat))
            for constraint in _take(
                rng, constraint_cands, limits.constraints_per_counting_chunk
            ):
                kept = oracle.apply_constraint(matches, constraint, clip, session)
                if len(kept) > lexicon.max_count:
                    continue
                chunks.append(
                    SemanticChunk(
                        qtype=QuestionType.COUNTING,
                        predicate=etype,
                        args=args,
                        constraint=constraint,
                        target_event_id=target.id,
                        answer_token=len(kept),
                    )
                )

    # ---- state probes (gated so they stay a small share of the corpus) ---- #
    if float(rng.random()) < limits.state_probe_prob:
        chunks.append(
            SemanticChunk(
                qtype=QuestionType.STATE,
                probe=PROBE_STAGE_TYPE,
                target_event_id=target.id,
                answer_token=session.stage_type,
            )
        )
        overlapping = states_overlapping(clip, session)
        if len(overlapping) == 1:
            chunks.append(
                SemanticChunk(
                    qtype=QuestionType.STATE,
                    probe=PROBE_MARIO_STATE,
                    target_event_id=target.id,
                    answer_token=overlapping[0],
                )
            )
        state_refs = _take(rng, refs, limits.state_constraints_per_clip)
        for rev, pattern in state_refs:
            chunks.append(
                SemanticChunk(
                    qtype=QuestionType.STATE,
                    probe=PROBE_MARIO_STATE,
                    constraint=TemporalConstraint(Relation.WHEN, pattern),
                    target_event_id=target.id,
                    answer_token=state_at(session, rev.time_ms),
                )
            )
    return chunks


def realize(template: Template, chunk: SemanticChunk, lexicon: Lexicon) -> tuple[str, str]:
    """Fill the template from the chunk; return (question, answer class)."""
    clause = ""
    if chunk.constraint is not None:
        ref = chunk.constraint.reference
        clause_tpl = lexicon.clause_template(ref.etype, chunk.constraint.relation.value)
        clause_text = render_surface(clause_tpl, ref.args, lexicon)
        clause = f" {chunk.constraint.relation.value} {clause_text}"
    question = render_surface(template.surface, chunk.args, lexicon, temporal_clause=clause)
    token = chunk.answer_token
    if token is None:
        raise LexiconError("chunk carries no answer provenance")
    if chunk.qtype is QuestionType.EVENT_CENTRIC:
        answer = lexicon.answer_class(token)  # type: ignore[arg-type]
    elif chunk.qtype is QuestionType.COUNTING:
        answer = lexicon.count_class(int(token))  # type: ignore[arg-type]
    elif chunk.probe == PROBE_STAGE_TYPE:
        answer = lexicon.stage_class(token)  # type: ignore[arg-type]
    else:
        answer = lexicon.state_class(token)  # type: ignore[arg-type]
    return question, answer


def generate_for_target(
    session: GameplaySession,
    target: Event,
    lexicon: Lexicon,
    pool: TemplatePool,
    seed: SeedLike,
    limits: Optional[GenerationLimits] = None,
    counters: Optional[Counter] = None,
) -> list[QAPair]:
    """Generate every accepted QA pair for one target event."""
    counters = counters if counters is not None else Counter()
    rng = make_rng(seed)
    clip = sample_clip(session, target, rng)
    window = events_in(clip, session)
    type_counts = Counter(e.etype for e in window)
    pairs = []
    for chunk in form_chunks(target, clip, session, lexicon, pool, rng, limits):
        if (
            chunk.qtype is QuestionType.EVENT_CENTRIC
            and chunk.constraint is None
            and type_counts[chunk.predicate] > 1
        ):
            counters["rejected_nt_distractor"] += 1
            continue
        try:
            answers = oracle.answer(chunk, clip, session, lexicon)
        except DanglingReferenceError:
            counters["rejected_dangling_reference"] += 1
            continue
        if len(answers) != 1:
            counters["rejected_ambiguous"] += 1
            continue
        subset = classify_subset(clip, session, chunk)
        try:
            template = select_template(pool, chunk, rng)
        except CoverageError:
            counters["rejected_no_template"] += 1
            continue
        question, answer = realize(template, chunk, lexicon)
        if answers != {answer}:
            raise ConsistencyError(
                f"generated answer {answer!r} diverges from oracle {set(answers)!r} "
                f"for chunk {chunk}"
            )
        counters["emitted"] += 1
        pairs.append(
            QAPair(
                question=question,
                answer=answer,
                chunk=chunk,
                subset=subset,
                qtype=chunk.qtype,
                clip=clip,
                template_id=template.id,
                session_id=session.id,
            )
        )
    return pairs


def generate_dataset(
    sessions: Sequence[GameplaySession],
    lexicon: Lexicon,
    pool: TemplatePool,
    seed: SeedLike,
    limits: Optional[GenerationLimits] = None,
) -> tuple[list[QAPair], dict[str, int]]:
    """Run the full generation pipeline over many sessions.

    Every event of every sampleable session serves as a target once.
    Per-target seeds derive from one root seed, so output is a pure
    function of (sessions, seed) regardless of iteration batching.
    """
    counters: Counter = Counter()
    pairs: list[QAPair] = []
    session_seeds = spawn(seed, len(sessions))
    for session, session_seq in zip(sessions, session_seeds):
        if session.duration_ms < MIN_CLIP_MS:
            counters["sessions_too_short"] += 1
            continue
        target_seeds = session_seq.spawn(len(session.events))
        for target, target_seq in zip(session.events, target_seeds):
            pairs.extend(
                generate_for_target(
                    session, target, lexicon, pool, target_seq, limits, counters
                )
            )
    return pairs, dict(counters)
