"""Core domain model: gameplay events, sessions, clips and question chunks.

All times are integer milliseconds from session start.  Mario-state
intervals use half-open ``[start, end)`` windows so the timeline can be
partitioned without ambiguity; clips use closed ``[start, end]`` windows so
boundary events belong to the clip.  Every record type is immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

MIN_CLIP_MS = 3000
MAX_CLIP_MS = 6000

# Tolerance for "when" constraints between two events: the candidate event
# counts as simultaneous with the reference if their timestamps differ by
# at most this much.
WHEN_TOLERANCE_MS = 250


# --------------------------------------------------------------------------- #
# Errors
# --------------------------------------------------------------------------- #


class ForgeError(Exception):
    """Base class for all errors raised by this package."""


class SessionMismatchError(ForgeError):
    """A clip was applied to a session it does not belong to."""


class TimeRangeError(ForgeError):
    """A queried time lies outside the session timeline."""


class SessionValidationError(ForgeError):
    """A session violates a structural or lexicon invariant."""


class LogParseError(ForgeError):
    """A session/dataset file line could not be parsed.

    Attributes:
        line_no: 1-based line number of the offending line, when known.
    """

    def __init__(self, message: str, line_no: Optional[int] = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConfigError(ForgeError):
    """A configuration file is invalid."""


class UnsampleableError(ForgeError):
    """No clip satisfying the duration bounds fits in the session."""


class ConsistencyError(ForgeError):
    """A chunk, clip and session do not agree with each other."""


class CoverageError(ForgeError):
    """No template in the pool matches a chunk signature."""


class LexiconError(ForgeError):
    """A token has no entry in the loaded lexicon."""


class DanglingReferenceError(ForgeError):
    """A temporal constraint references a pattern with no match in the clip."""


class ShapeError(ForgeError):
    """Numeric inputs have inconsistent dimensions."""


class IntegrityError(ForgeError):
    """Cross-file references (session ids, example ids) do not resolve."""


# --------------------------------------------------------------------------- #
# Closed vocabularies
# --------------------------------------------------------------------------- #


class EventType(enum.Enum):
    """The 11 gameplay event predicates."""

    KILL = "kill"
    DIE = "die"
    JUMP = "jump"
    HIT = "hit"
    BREAK = "break"
    APPEAR = "appear"
    SHOOT = "shoot"
    THROW = "throw"
    KICK = "kick"
    HOLD = "hold"
    EAT = "eat"

    @classmethod
    def parse(cls, token: str) -> "EventType":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown event type {token!r}") from None


class Role(enum.Enum):
    """Argument roles an event can carry."""

    AGENT = "agent"
    PATIENT = "patient"
    MEANS = "means"
    LOCATION = "location"

    @classmethod
    def parse(cls, token: str) -> "Role":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown role {token!r}") from None


#: Canonical serialization order for event arguments.
ROLE_ORDER = (Role.AGENT, Role.PATIENT, Role.MEANS, Role.LOCATION)


class MarioState(enum.Enum):
    """Mario's power-up state."""

    SMALL = "small"
    SUPER = "super"
    FIRE_FORM = "fire_form"

    @classmethod
    def parse(cls, token: str) -> "MarioState":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown mario state {token!r}") from None


class Subset(enum.Enum):
    """Temporal-difficulty subset of a question."""

    NT = "NT"  # no temporal relationship
    ET = "ET"  # temporal relationship, no distracting events
    HT = "HT"  # temporal relationship with distracting events

    @classmethod
    def parse(cls, token: str) -> "Subset":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown subset {token!r}") from None


class QuestionType(enum.Enum):
    EVENT_CENTRIC = "event_centric"
    COUNTING = "counting"
    STATE = "state"

    @classmethod
    def parse(cls, token: str) -> "QuestionType":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown question type {token!r}") from None


class Relation(enum.Enum):
    """Temporal relation between a questioned event and a reference event."""

    BEFORE = "before"
    AFTER = "after"
    WHEN = "when"

    @classmethod
    def parse(cls, token: str) -> "Relation":
        try:
            return cls(token)
        except ValueError:
            raise LogParseError(f"unknown relation {token!r}") from None


#: State-question probes (these are not event predicates).
PROBE_MARIO_STATE = "mario_state"
PROBE_STAGE_TYPE = "stage_type"


# --------------------------------------------------------------------------- #
# Records
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Event:
    """One timestamped gameplay predicate with role-labelled arguments."""

    id: int
    etype: EventType
    time_ms: int
    args: Mapping[Role, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.time_ms < 0:
            raise SessionValidationError(f"event {self.id}: negative time {self.time_ms}")


@dataclass(frozen=True)
class MarioStateInterval:
    """Half-open interval [start_ms, end_ms) during which one state holds."""

    state: MarioState
    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if not 0 <= self.start_ms < self.end_ms:
            raise SessionValidationError(
                f"bad state interval [{self.start_ms}, {self.end_ms})"
            )

    def contains(self, t_ms: int) -> bool:
        return self.start_ms <= t_ms < self.end_ms


@dataclass(frozen=True)
class GameplaySession:
    """A full gameplay log: time-sorted events plus the state timeline."""

    id: int
    stage_type: str
    duration_ms: int
    events: tuple[Event, ...] = ()
    state_timeline: tuple[MarioStateInterval, ...] = ()

    def __post_init__(self) -> None:
        if self.duration_ms < 0:
            raise SessionValidationError(f"session {self.id}: negative duration")
        seen: set[int] = set()
        prev_key = (-1, -1)
        for ev in self.events:
            if ev.id in seen:
                raise SessionValidationError(f"session {self.id}: duplicate event id {ev.id}")
            seen.add(ev.id)
            key = (ev.time_ms, ev.id)
            if key < prev_key:
                raise SessionValidationError(f"session {self.id}: events not time-sorted")
            prev_key = key
            if not ev.time_ms < self.duration_ms:
                raise SessionValidationError(
                    f"session {self.id}: event {ev.id} at {ev.time_ms} ms "
                    f"outside duration {self.duration_ms}"
                )
        # The state timeline must partition [0, duration_ms).
        if self.duration_ms > 0:
            if not self.state_timeline:
                raise SessionValidationError(f"session {self.id}: empty state timeline")
            cursor = 0
            for iv in self.state_timeline:
                if iv.start_ms != cursor:
                    raise SessionValidationError(
                        f"session {self.id}: state timeline gap/overlap at {iv.start_ms} ms"
                    )
                cursor = iv.end_ms
            if cursor != self.duration_ms:
                raise SessionValidationError(
                    f"session {self.id}: state timeline ends at {cursor} ms, "
                    f"expected {self.duration_ms}"
                )
        elif self.state_timeline:
            raise SessionValidationError(f"session {self.id}: timeline on zero-length session")
        # Cache event timestamps for bisect lookups (frozen dataclass, so
        # attach via object.__setattr__).
        object.__setattr__(self, "_times", tuple(e.time_ms for e in self.events))

    def event_by_id(self, event_id: int) -> Event:
        for ev in self.events:
            if ev.id == event_id:
                return ev
        raise IntegrityError(f"session {self.id}: no event with id {event_id}")


@dataclass(frozen=True)
class Clip:
    """A closed time window [start_ms, end_ms] anchored on a target event."""

    session_id: int
    start_ms: int
    end_ms: int
    target_event_id: int

    def __post_init__(self) -> None:
        dur = self.end_ms - self.start_ms
        if not MIN_CLIP_MS <= dur <= MAX_CLIP_MS:
            raise SessionValidationError(
                f"clip duration {dur} ms outside [{MIN_CLIP_MS}, {MAX_CLIP_MS}]"
            )
        if self.start_ms < 0:
            raise SessionValidationError("clip starts before session")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class EventPattern:
    """An event type plus a partial argument binding, used for matching."""

    etype: EventType
    args: Mapping[Role, str] = field(default_factory=dict)


@dataclass(frozen=True)
class TemporalConstraint:
    """Restricts questioned events relative to a reference event pattern."""

    relation: Relation
    reference: EventPattern


@dataclass(frozen=True)
class SemanticChunk:
    """The machine-readable meaning of a question before realization.

    For event-centric chunks ``args`` holds the target event's arguments
    minus the eliminated role (``hole``).  Counting chunks have no hole;
    their ``args`` restrict which events are counted.  State chunks probe
    either the stage type or Mario's state and carry no predicate.

    ``target_event_id`` and ``answer_token`` are generation provenance:
    the clip's anchor event and the value the eliminated argument had
    (entity token, count, ``MarioState`` or stage token).  The oracle
    ignores both and recomputes answers from the pattern alone.
    """

    qtype: QuestionType
    predicate: Optional[EventType] = None
    probe: Optional[str] = None
    args: Mapping[Role, str] = field(default_factory=dict)
    hole: Optional[Role] = None
    constraint: Optional[TemporalConstraint] = None
    target_event_id: Optional[int] = None
    answer_token: Optional[Union[str, int, MarioState]] = None

    def __post_init__(self) -> None:
        if self.qtype is QuestionType.EVENT_CENTRIC:
            if self.predicate is None or self.hole is None:
                raise ConsistencyError("event-centric chunk needs a predicate and a hole")
            if self.hole in self.args:
                raise ConsistencyError("the eliminated role must not stay bound")
        elif self.qtype is QuestionType.COUNTING:
            if self.predicate is None or self.hole is not None:
                raise ConsistencyError("counting chunk needs a predicate and no hole")
        elif self.qtype is QuestionType.STATE:
            if self.probe not in (PROBE_MARIO_STATE, PROBE_STAGE_TYPE):
                raise ConsistencyError(f"unknown state probe {self.probe!r}")
            if self.predicate is not None or self.hole is not None:
                raise ConsistencyError("state chunk must not carry a predicate or hole")
            if self.probe == PROBE_STAGE_TYPE and self.constraint is not None:
                raise ConsistencyError("stage-type probe takes no temporal constraint")

    def pattern(self) -> EventPattern:
        if self.predicate is None:
            raise ConsistencyError("state chunks have no event pattern")
        return EventPattern(self.predicate, dict(self.args))


# --------------------------------------------------------------------------- #
# Core operations
# --------------------------------------------------------------------------- #


def events_in(clip: Clip, session: GameplaySession) -> tuple[Event, ...]:
    """Events of ``session`` with ``start_ms <= time_ms <= end_ms``, in time order."""
    if clip.session_id != session.id:
        raise SessionMismatchError(
            f"clip belongs to session {clip.session_id}, got session {session.id}"
        )
    times = session._times  # type: ignore[attr-defined]
    lo = bisect_left(times, clip.start_ms)
    hi = bisect_right(times, clip.end_ms)
    return session.events[lo:hi]


def state_at(session: GameplaySession, t_ms: int) -> MarioState:
    """Mario's state at time ``t_ms`` (half-open interval convention)."""
    if not 0 <= t_ms < session.duration_ms:
        raise TimeRangeError(
            f"t={t_ms} ms outside session {session.id} [0, {session.duration_ms})"
        )
    for iv in session.state_timeline:
        if iv.contains(t_ms):
            return iv.state
    raise SessionValidationError(f"session {session.id}: timeline does not cover {t_ms} ms")


def states_overlapping(clip: Clip, session: GameplaySession) -> tuple[MarioState, ...]:
    """Distinct states whose intervals intersect the clip window, in timeline order."""
    if clip.session_id != session.id:
        raise SessionMismatchError(
            f"clip belongs to session {clip.session_id}, got session {session.id}"
        )
    seen: list[MarioState] = []
    for iv in session.state_timeline:
        if iv.start_ms <= clip.end_ms and iv.end_ms > clip.start_ms:
            if iv.state not in seen:
                seen.append(iv.state)
    return tuple(seen)


# --------------------------------------------------------------------------- #
# Canonical JSON serialization
# --------------------------------------------------------------------------- #
#
# Canonical form fixes key order and uses compact separators so that
# serialize(parse(line)) == line byte-for-byte.  Event arguments are
# ordered agent, patient, means, location.


def dumps_canonical(obj: object) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def event_to_obj(ev: Event) -> dict:
    args = {r.value: ev.args[r] for r in ROLE_ORDER if r in ev.args}
    return {"id": ev.id, "type": ev.etype.value, "t": ev.time_ms, "args": args}


def event_from_obj(obj: object, line_no: Optional[int] = None) -> Event:
    if not isinstance(obj, dict):
        raise LogParseError("event is not an object", line_no)
    try:
        eid = obj["id"]
        etype = obj["type"]
        t = obj["t"]
    except KeyError as exc:
        raise LogParseError(f"event missing field {exc.args[0]!r}", line_no) from None
    if not isinstance(eid, int) or not isinstance(t, int):
        raise LogParseError("event id and t must be integers", line_no)
    raw_args = obj.get("args", {})
    if not isinstance(raw_args, dict):
        raise LogParseError("event args must be an object", line_no)
    try:
        parsed = EventType.parse(etype)
        args = {Role.parse(k): v for k, v in raw_args.items()}
    except LogParseError as exc:
        raise LogParseError(str(exc), line_no) from None
    for v in args.values():
        if not isinstance(v, str):
            raise LogParseError("event argument values must be strings", line_no)
    return Event(id=eid, etype=parsed, time_ms=t, args=args)


def session_to_obj(session: GameplaySession) -> dict:
    return {
        "id": session.id,
        "stage_type": session.stage_type,
        "duration_ms": session.duration_ms,
        "events": [event_to_obj(e) for e in session.events],
        "states": [
            {"state": iv.state.value, "start": iv.start_ms, "end": iv.end_ms}
            for iv in session.state_timeline
        ],
    }


def session_to_line(session: GameplaySession) -> str:
    return dumps_canonical(session_to_obj(session))


def session_from_obj(obj: object, line_no: Optional[int] = None) -> GameplaySession:
    if not isinstance(obj, dict):
        raise LogParseError("session is not an object", line_no)
    for key in ("id", "stage_type", "duration_ms", "events", "states"):
        if key not in obj:
            raise LogParseError(f"session missing field {key!r}", line_no)
    if not isinstance(obj["id"], int) or not isinstance(obj["duration_ms"], int):
        raise LogParseError("session id and duration_ms must be integers", line_no)
    if not isinstance(obj["stage_type"], str):
        raise LogParseError("stage_type must be a string", line_no)
    if not isinstance(obj["events"], list) or not isinstance(obj["states"], list):
        raise LogParseError("events and states must be arrays", line_no)
    events = tuple(event_from_obj(e, line_no) for e in obj["events"])
    states = []
    for sobj in obj["states"]:
        if not isinstance(sobj, dict):
            raise LogParseError("state interval is not an object", line_no)
        try:
            state = MarioState.parse(sobj["state"])
            start, end = sobj["start"], sobj["end"]
        except KeyError as exc:
            raise LogParseError(f"state interval missing {exc.args[0]!r}", line_no) from None
        except LogParseError as exc:
            raise LogParseError(str(exc), line_no) from None
        if not isinstance(start, int) or not isinstance(end, int):
            raise LogParseError("state interval bounds must be integers", line_no)
        states.append(MarioStateInterval(state=state, start_ms=start, end_ms=end))
    return GameplaySession(
        id=obj["id"],
        stage_type=obj["stage_type"],
        duration_ms=obj["duration_ms"],
        events=events,
        state_timeline=tuple(states),
    )


def session_from_line(line: str, line_no: Optional[int] = None) -> GameplaySession:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogParseError(f"invalid JSON: {exc.msg}", line_no) from None
    return session_from_obj(obj, line_no)


# ---- chunks and constraints ------------------------------------------------ #


def constraint_to_obj(c: TemporalConstraint) -> dict:
    args = {r.value: c.reference.args[r] for r in ROLE_ORDER if r in c.reference.args}
    return {"relation": c.relation.value, "type": c.reference.etype.value, "args": args}


def constraint_from_obj(obj: object, line_no: Optional[int] = None) -> TemporalConstraint:
    if not isinstance(obj, dict):
        raise LogParseError("constraint is not an object", line_no)
    try:
        relation = Relation.parse(obj["relation"])
        etype = EventType.parse(obj["type"])
    except KeyError as exc:
        raise LogParseError(f"constraint missing {exc.args[0]!r}", line_no) from None
    except LogParseError as exc:
        raise LogParseError(str(exc), line_no) from None
    raw_args = obj.get("args", {})
    args = {Role.parse(k): v for k, v in raw_args.items()}
    return TemporalConstraint(relation=relation, reference=EventPattern(etype, args))


def chunk_to_obj(chunk: SemanticChunk) -> dict:
    obj: dict = {"qtype": chunk.qtype.value}
    if chunk.qtype is QuestionType.STATE:
        obj["probe"] = chunk.probe
    else:
        obj["predicate"] = chunk.predicate.value  # type: ignore[union-attr]
        obj["args"] = {r.value: chunk.args[r] for r in ROLE_ORDER if r in chunk.args}
    if chunk.hole is not None:
        obj["hole"] = chunk.hole.value
    if chunk.constraint is not None:
        obj["constraint"] = constraint_to_obj(chunk.constraint)
    if chunk.target_event_id is not None:
        obj["target"] = chunk.target_event_id
    return obj


def chunk_from_obj(obj: object, line_no: Optional[int] = None) -> SemanticChunk:
    if not isinstance(obj, dict):
        raise LogParseError("chunk is not an object", line_no)
    try:
        qtype = QuestionType.parse(obj["qtype"])
    except KeyError:
        raise LogParseError("chunk missing 'qtype'", line_no) from None
    except LogParseError as exc:
        raise LogParseError(str(exc), line_no) from None
    constraint = None
    if "constraint" in obj:
        constraint = constraint_from_obj(obj["constraint"], line_no)
    target = obj.get("target")
    try:
        if qtype is QuestionType.STATE:
            return SemanticChunk(
                qtype=qtype,
                probe=obj.get("probe"),
                constraint=constraint,
                target_event_id=target,
            )
        predicate = EventType.parse(obj["predicate"])
        args = {Role.parse(k): v for k, v in obj.get("args", {}).items()}
        hole = Role.parse(obj["hole"]) if "hole" in obj else None
        return SemanticChunk(
            qtype=qtype,
            predicate=predicate,
            args=args,
            hole=hole,
            constraint=constraint,
            target_event_id=target,
        )
    except KeyError as exc:
        raise LogParseError(f"chunk missing {exc.args[0]!r}", line_no) from None
    except (LogParseError, ConsistencyError) as exc:
        raise LogParseError(str(exc), line_no) from None
