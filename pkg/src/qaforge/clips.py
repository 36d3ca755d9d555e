"""Clip sampling, distractor detection and temporal-difficulty classification."""

from __future__ import annotations

from .model import (
    Clip,
    ConsistencyError,
    Event,
    GameplaySession,
    MAX_CLIP_MS,
    MIN_CLIP_MS,
    QuestionType,
    SemanticChunk,
    Subset,
    UnsampleableError,
    PROBE_STAGE_TYPE,
    events_in,
    states_overlapping,
)
from . import oracle
from .seeding import SeedLike, make_rng


def sample_clip(session: GameplaySession, target: Event, seed: SeedLike) -> Clip:
    """Sample a clip window containing the target event.

    The duration is drawn uniformly from [3000, 6000] ms (clamped to the
    session length) and the window position uniformly among all placements
    that contain the target and stay inside the session.
    """
    if session.duration_ms < MIN_CLIP_MS:
        raise UnsampleableError(
            f"session {session.id} is {session.duration_ms} ms, "
            f"shorter than the minimum clip of {MIN_CLIP_MS} ms"
        )
    if not any(e.id == target.id for e in session.events):
        raise ConsistencyError(f"event {target.id} is not part of session {session.id}")
    rng = make_rng(seed)
    duration = int(rng.integers(MIN_CLIP_MS, min(MAX_CLIP_MS, session.duration_ms) + 1))
    lo = max(0, target.time_ms - duration)
    hi = min(target.time_ms, session.duration_ms - duration)
    start = int(rng.integers(lo, hi + 1))
    return Clip(
        session_id=session.id,
        start_ms=start,
        end_ms=start + duration,
        target_event_id=target.id,
    )


def find_distractors(
    clip: Clip, session: GameplaySession, target: Event
) -> tuple[Event, ...]:
    """In-clip events of the target's type (arguments wildcarded), minus the target.

    Distraction is type-level: any other ``kill(*, *)`` distracts a kill
    question regardless of its arguments.
    """
    window = events_in(clip, session)
    if not any(e.id == target.id for e in window):
        raise ConsistencyError(f"target event {target.id} is not inside the clip")
    return tuple(e for e in window if e.etype is target.etype and e.id != target.id)


def classify_subset(
    clip: Clip, session: GameplaySession, chunk: SemanticChunk
) -> Subset:
    """Assign the temporal-difficulty subset of a chunk on this clip.

    Event-centric: NT without a constraint; with one, ET when the target
    event type is unique in the clip and HT when distracting events of the
    same type are present.  Counting: NT without a constraint, ET when the
    constraint leaves the counted set unchanged, HT when it shrinks it.
    State: stage probes are NT; state probes are NT when unconstrained
    (single-state clips only), else ET when one state spans the clip and
    HT when the clip crosses a state change.
    """
    if chunk.qtype is QuestionType.EVENT_CENTRIC:
        window = events_in(clip, session)
        n_type = sum(1 for e in window if e.etype is chunk.predicate)
        if n_type == 0:
            raise ConsistencyError(
                f"clip contains no {chunk.predicate.value} event for the chunk"  # type: ignore[union-attr]
            )
        if chunk.constraint is None:
            return Subset.NT
        return Subset.ET if n_type == 1 else Subset.HT
    if chunk.qtype is QuestionType.COUNTING:
        base = oracle.match_events(chunk.pattern(), clip, session)
        if chunk.constraint is None:
            return Subset.NT
        kept = oracle.apply_constraint(base, chunk.constraint, clip, session)
        same = {e.id for e in kept} == {e.id for e in base}
        return Subset.ET if same else Subset.HT
    # state probes
    if chunk.probe == PROBE_STAGE_TYPE:
        return Subset.NT
    overlapping = states_overlapping(clip, session)
    if chunk.constraint is None:
        if len(overlapping) != 1:
            raise ConsistencyError(
                "unconstrained state probe on a clip spanning multiple states"
            )
        return Subset.NT
    return Subset.ET if len(overlapping) == 1 else Subset.HT
