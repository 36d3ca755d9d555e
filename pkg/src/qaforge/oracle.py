"""Brute-force, rule-based answering of semantic chunks over clip event logs.

This is the ground-truth engine: every generated QA pair is replayed
against it, so the implementation deliberately stays a linear scan over
the clip's events with no indexing shortcuts that could diverge from the
definitions.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .lexicon import Lexicon
from .model import (
    Clip,
    DanglingReferenceError,
    Event,
    EventPattern,
    GameplaySession,
    QuestionType,
    Relation,
    SemanticChunk,
    TemporalConstraint,
    WHEN_TOLERANCE_MS,
    PROBE_STAGE_TYPE,
    events_in,
    state_at,
    states_overlapping,
)


def match_events(
    pattern: EventPattern, clip: Clip, session: GameplaySession
) -> tuple[Event, ...]:
    """Clip events whose type equals the pattern's and whose args agree on
    every role the pattern specifies (unspecified roles are wildcards)."""
    out = []
    for ev in events_in(clip, session):
        if ev.etype is not pattern.etype:
            continue
        if all(ev.args.get(role) == value for role, value in pattern.args.items()):
            out.append(ev)
    return tuple(out)


def apply_constraint(
    candidates: Sequence[Event],
    constraint: TemporalConstraint,
    clip: Clip,
    session: GameplaySession,
) -> tuple[Event, ...]:
    """Filter candidates by their temporal relation to the reference events.

    ``after`` keeps candidates strictly later than every reference match and
    ``before`` strictly earlier (ties are excluded from both sides, keeping
    the two relations complementary); ``when`` keeps candidates within
    ``WHEN_TOLERANCE_MS`` of some reference match.  Generation only ever
    emits constraints whose reference matches a single clip event, but the
    multi-match semantics above keep the oracle total.
    """
    refs = match_events(constraint.reference, clip, session)
    if not refs:
        raise DanglingReferenceError(
            f"constraint reference {constraint.reference.etype.value} "
            f"matches no event in clip"
        )
    ref_times = [r.time_ms for r in refs]
    if constraint.relation is Relation.AFTER:
        cut = max(ref_times)
        kept = [e for e in candidates if e.time_ms > cut]
    elif constraint.relation is Relation.BEFORE:
        cut = min(ref_times)
        kept = [e for e in candidates if e.time_ms < cut]
    else:  # WHEN
        kept = [
            e
            for e in candidates
            if any(abs(e.time_ms - t) <= WHEN_TOLERANCE_MS for t in ref_times)
        ]
    return tuple(kept)


def _surviving_matches(
    chunk: SemanticChunk, clip: Clip, session: GameplaySession
) -> tuple[Event, ...]:
    matches = match_events(chunk.pattern(), clip, session)
    if chunk.qtype is QuestionType.EVENT_CENTRIC:
        # An event can only answer the question if the eliminated role is
        # actually filled on it.
        matches = tuple(e for e in matches if chunk.hole in e.args)
    if chunk.constraint is not None:
        matches = apply_constraint(matches, chunk.constraint, clip, session)
    return matches


def answer(
    chunk: SemanticChunk, clip: Clip, session: GameplaySession, lexicon: Lexicon
) -> frozenset[str]:
    """The set of answer classes the chunk admits on this clip.

    Event-centric chunks map every surviving match's hole argument to its
    answer class; counting chunks yield the single count token; state
    chunks yield the stage class, the state at the reference time, or all
    states overlapping the clip when unconstrained.
    """
    if chunk.qtype is QuestionType.EVENT_CENTRIC:
        matches = _surviving_matches(chunk, clip, session)
        return frozenset(
            lexicon.answer_class(e.args[chunk.hole]) for e in matches  # type: ignore[index]
        )
    if chunk.qtype is QuestionType.COUNTING:
        matches = _surviving_matches(chunk, clip, session)
        return frozenset({str(len(matches))})
    # state probes
    if chunk.probe == PROBE_STAGE_TYPE:
        return frozenset({lexicon.stage_class(session.stage_type)})
    if chunk.constraint is not None:
        refs = match_events(chunk.constraint.reference, clip, session)
        if not refs:
            raise DanglingReferenceError(
                "state probe reference matches no event in clip"
            )
        return frozenset(
            lexicon.state_class(state_at(session, r.time_ms)) for r in refs
        )
    return frozenset(
        lexicon.state_class(s) for s in states_overlapping(clip, session)
    )


def is_unique(
    chunk: SemanticChunk, clip: Clip, session: GameplaySession, lexicon: Lexicon
) -> bool:
    """True iff the chunk has exactly one answer class on this clip."""
    try:
        return len(answer(chunk, clip, session, lexicon)) == 1
    except DanglingReferenceError:
        return False
