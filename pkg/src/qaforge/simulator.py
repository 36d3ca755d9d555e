"""Synthetic gameplay-session generation and external log ingestion.

``simulate_session`` is a pure function of (config, seed): every random
draw flows through one PCG64 generator in a fixed order (stage, state
timeline, then per event type counts/times/arguments in declaration
order, then causal repairs), so identical inputs reproduce sessions
byte-for-byte across platforms.

Causal coupling rules are declarative.  A ``require_state`` rule confines
the trigger type's timestamps to intervals where the state holds (the
drawn event count is preserved; if no such interval exists the events are
dropped).  A ``require_preceding`` rule injects a missing prerequisite
event shortly before each trigger, which adds slightly to the configured
rate of the prerequisite type; keep trigger rates modest if that matters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence

import numpy as np

from .lexicon import Lexicon
from .model import (
    ConfigError,
    Event,
    EventPattern,
    EventType,
    GameplaySession,
    LogParseError,
    MarioState,
    MarioStateInterval,
    Role,
    ROLE_ORDER,
    SessionValidationError,
    session_from_line,
    session_to_line,
)
from .seeding import SeedLike, make_rng, spawn

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CausalRule:
    """Precondition a trigger pattern must satisfy in every emitted session."""

    trigger: EventPattern
    require_preceding: Optional[tuple[EventType, int]] = None  # (type, within_ms)
    require_state: Optional[MarioState] = None

    def triggered_by(self, ev: Event) -> bool:
        if ev.etype is not self.trigger.etype:
            return False
        return all(ev.args.get(r) == v for r, v in self.trigger.args.items())


@dataclass(frozen=True)
class SimulatorConfig:
    duration_ms: int
    stage_distribution: Mapping[str, float]
    initial_state_distribution: Mapping[MarioState, float]
    state_changes_per_min: float
    event_rates_per_min: Mapping[EventType, float]
    argument_distributions: Mapping[EventType, Mapping[Role, Mapping[str, float]]]
    optional_fill_prob: Mapping[EventType, Mapping[Role, float]] = field(default_factory=dict)
    causal_rules: tuple[CausalRule, ...] = ()

    def total_rate_per_min(self) -> float:
        return float(sum(self.event_rates_per_min.values()))


def _check_distribution(name: str, dist: Mapping) -> None:
    if not dist:
        raise ConfigError(f"{name}: empty distribution")
    for key, w in dist.items():
        if w < 0:
            raise ConfigError(f"{name}: negative weight for {key!r}")
    if abs(sum(dist.values()) - 1.0) > _SUM_TOL:
        raise ConfigError(f"{name}: weights sum to {sum(dist.values())}, expected 1")


def validate_config(config: SimulatorConfig, lexicon: Optional[Lexicon] = None) -> None:
    if config.duration_ms < 0:
        raise ConfigError("duration_ms must be non-negative")
    if config.state_changes_per_min < 0:
        raise ConfigError("state_changes_per_min must be non-negative")
    _check_distribution("stage_distribution", config.stage_distribution)
    _check_distribution("initial_state_distribution", config.initial_state_distribution)
    for etype, rate in config.event_rates_per_min.items():
        if rate < 0:
            raise ConfigError(f"event rate for {etype.value!r} must be non-negative")
    for etype, per_role in config.argument_distributions.items():
        for role, dist in per_role.items():
            _check_distribution(f"argument_distributions[{etype.value}][{role.value}]", dist)
    if lexicon is not None:
        for stage in config.stage_distribution:
            if stage not in lexicon.stages:
                raise ConfigError(f"stage {stage!r} not in lexicon")
        for etype, per_role in config.argument_distributions.items():
            schema = lexicon.schema(etype)
            for role, dist in per_role.items():
                if role not in schema.roles:
                    raise ConfigError(
                        f"{etype.value} does not declare role {role.value!r}"
                    )
                for token in dist:
                    if token not in lexicon.entities:
                        raise ConfigError(f"unknown entity {token!r} in config")
        for etype in config.event_rates_per_min:
            if config.event_rates_per_min[etype] <= 0:
                continue
            schema = lexicon.schema(etype)
            per_role = config.argument_distributions.get(etype, {})
            for role in schema.mandatory:
                if role not in per_role:
                    raise ConfigError(
                        f"{etype.value}: mandatory role {role.value!r} has no "
                        f"argument distribution"
                    )


# --------------------------------------------------------------------------- #
# Simulation
# --------------------------------------------------------------------------- #


def _draw_categorical(rng: np.random.Generator, dist: Mapping) -> object:
    u = float(rng.random())
    acc = 0.0
    keys = list(dist)
    for key in keys:
        acc += dist[key]
        if u < acc:
            return key
    return keys[-1]  # guard against accumulated rounding


def _draw_state_timeline(
    rng: np.random.Generator, config: SimulatorConfig
) -> tuple[MarioStateInterval, ...]:
    duration = config.duration_ms
    if duration == 0:
        return ()
    expected = config.state_changes_per_min * duration / 60_000.0
    n_changes = int(rng.poisson(expected))
    times: list[int] = []
    if n_changes > 0 and duration > 1:
        raw = rng.integers(1, duration, size=n_changes)
        times = sorted(set(int(t) for t in raw))
    state = _draw_state(rng, config.initial_state_distribution)
    intervals = []
    cursor = 0
    for t in times:
        intervals.append(MarioStateInterval(state=state, start_ms=cursor, end_ms=t))
        others = [s for s in MarioState if s is not state]
        state = others[int(rng.integers(0, len(others)))]
        cursor = t
    intervals.append(MarioStateInterval(state=state, start_ms=cursor, end_ms=duration))
    return tuple(intervals)


def _draw_state(rng: np.random.Generator, dist: Mapping[MarioState, float]) -> MarioState:
    return _draw_categorical(rng, dist)  # type: ignore[return-value]


def _allowed_intervals(
    timeline: Sequence[MarioStateInterval], required: Optional[MarioState]
) -> list[tuple[int, int]]:
    if required is None:
        if not timeline:
            return []
        return [(timeline[0].start_ms, timeline[-1].end_ms)]
    return [(iv.start_ms, iv.end_ms) for iv in timeline if iv.state is required]


def _draw_times_in(
    rng: np.random.Generator, intervals: Sequence[tuple[int, int]], n: int
) -> list[int]:
    total = sum(e - s for s, e in intervals)
    if total <= 0 or n == 0:
        return []
    offsets = sorted(int(u) for u in rng.integers(0, total, size=n))
    times = []
    for u in offsets:
        for s, e in intervals:
            span = e - s
            if u < span:
                times.append(s + u)
                break
            u -= span
    return times


def _draw_args(
    rng: np.random.Generator, config: SimulatorConfig, etype: EventType
) -> dict[Role, str]:
    per_role = config.argument_distributions.get(etype, {})
    fill = config.optional_fill_prob.get(etype, {})
    args: dict[Role, str] = {}
    for role in ROLE_ORDER:
        if role not in per_role:
            continue
        prob = fill.get(role)
        if prob is not None and float(rng.random()) >= prob:
            continue
        args[role] = _draw_categorical(rng, per_role[role])  # type: ignore[assignment]
    return args


def _state_rule_for(config: SimulatorConfig, etype: EventType) -> Optional[MarioState]:
    for rule in config.causal_rules:
        if rule.require_state is not None and rule.trigger.etype is etype and not rule.trigger.args:
            return rule.require_state
    return None


def simulate_session(
    config: SimulatorConfig,
    seed: SeedLike,
    session_id: int = 1,
    lexicon: Optional[Lexicon] = None,
) -> GameplaySession:
    """Deterministically generate one session from (config, seed)."""
    validate_config(config, lexicon)
    rng = make_rng(seed)
    stage = _draw_categorical(rng, config.stage_distribution)
    timeline = _draw_state_timeline(rng, config)
    duration = config.duration_ms

    drawn: list[tuple[int, int, EventType, dict[Role, str]]] = []  # (t, seq, type, args)
    seq = 0
    for etype in EventType:
        rate = config.event_rates_per_min.get(etype, 0.0)
        expected = rate * duration / 60_000.0
        n = int(rng.poisson(expected)) if expected > 0 else 0
        intervals = _allowed_intervals(timeline, _state_rule_for(config, etype))
        for t in _draw_times_in(rng, intervals, n):
            drawn.append((t, seq, etype, _draw_args(rng, config, etype)))
            seq += 1

    drawn.sort(key=lambda item: (item[0], item[1]))

    # Repair pass: inject missing prerequisite events for precede rules.
    for rule in config.causal_rules:
        if rule.require_preceding is None:
            continue
        req_type, within = rule.require_preceding
        req_times = sorted(t for t, _, etype, _ in drawn if etype is req_type)
        probe = Event(id=0, etype=rule.trigger.etype, time_ms=0, args={})
        for t, _, etype, args in list(drawn):
            probe_ev = Event(id=0, etype=etype, time_ms=t, args=args)
            if not rule.triggered_by(probe_ev):
                continue
            if any(t - within <= rt <= t for rt in req_times):
                continue
            delta = int(rng.integers(0, min(within, t) + 1))
            inject_t = t - delta
            drawn.append((inject_t, seq, req_type, _draw_args(rng, config, req_type)))
            seq += 1
            req_times.append(inject_t)
            req_times.sort()
        drawn.sort(key=lambda item: (item[0], item[1]))

    events = tuple(
        Event(id=i + 1, etype=etype, time_ms=t, args=args)
        for i, (t, _, etype, args) in enumerate(drawn)
    )
    return GameplaySession(
        id=session_id,
        stage_type=stage,  # type: ignore[arg-type]
        duration_ms=duration,
        events=events,
        state_timeline=timeline,
    )


def simulate_sessions(
    config: SimulatorConfig,
    seed: SeedLike,
    count: int,
    lexicon: Optional[Lexicon] = None,
) -> list[GameplaySession]:
    """Generate ``count`` sessions with ids 1..count from independent child seeds."""
    validate_config(config, lexicon)
    children = spawn(seed, count)
    return [
        simulate_session(config, child, session_id=i + 1, lexicon=lexicon)
        for i, child in enumerate(children)
    ]


def check_causal_rules(session: GameplaySession, config: SimulatorConfig) -> list[str]:
    """Linear-scan verification that every configured precondition holds.

    Returns human-readable violation strings (empty list means sound).
    """
    violations = []
    for rule in config.causal_rules:
        for ev in session.events:
            if not rule.triggered_by(ev):
                continue
            if rule.require_preceding is not None:
                req_type, within = rule.require_preceding
                ok = any(
                    other.etype is req_type
                    and ev.time_ms - within <= other.time_ms <= ev.time_ms
                    for other in session.events
                )
                if not ok:
                    violations.append(
                        f"session {session.id}: event {ev.id} ({ev.etype.value}) "
                        f"lacks a preceding {req_type.value} within {within} ms"
                    )
            if rule.require_state is not None:
                from .model import state_at

                if state_at(session, ev.time_ms) is not rule.require_state:
                    violations.append(
                        f"session {session.id}: event {ev.id} ({ev.etype.value}) "
                        f"outside required state {rule.require_state.value}"
                    )
    return violations


# --------------------------------------------------------------------------- #
# Config and log files
# --------------------------------------------------------------------------- #


def config_from_obj(obj: dict) -> SimulatorConfig:
    try:
        duration = obj["duration_ms"]
        stage_dist = dict(obj["stage_distribution"])
        init_state = {MarioState(k): v for k, v in obj["initial_state_distribution"].items()}
        chg_rate = obj["state_changes_per_min"]
        rates = {EventType(k): v for k, v in obj["event_rates_per_min"].items()}
        arg_dists = {
            EventType(etype): {Role(role): dict(dist) for role, dist in per_role.items()}
            for etype, per_role in obj["argument_distributions"].items()
        }
    except KeyError as exc:
        raise ConfigError(f"simulator config missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"simulator config: {exc}") from None
    fill = {
        EventType(etype): {Role(role): p for role, p in per_role.items()}
        for etype, per_role in obj.get("optional_fill_prob", {}).items()
    }
    rules = []
    for robj in obj.get("causal_rules", []):
        trig = robj.get("trigger")
        if not isinstance(trig, dict) or "type" not in trig:
            raise ConfigError(f"causal rule missing trigger type: {robj!r}")
        trigger = EventPattern(
            EventType(trig["type"]),
            {Role(k): v for k, v in trig.get("args", {}).items()},
        )
        preceding = None
        if "require_preceding" in robj:
            p = robj["require_preceding"]
            preceding = (EventType(p["type"]), int(p["within_ms"]))
        state = MarioState(robj["require_state"]) if "require_state" in robj else None
        if preceding is None and state is None:
            raise ConfigError(f"causal rule has no requirement: {robj!r}")
        rules.append(
            CausalRule(trigger=trigger, require_preceding=preceding, require_state=state)
        )
    return SimulatorConfig(
        duration_ms=duration,
        stage_distribution=stage_dist,
        initial_state_distribution=init_state,
        state_changes_per_min=chg_rate,
        event_rates_per_min=rates,
        argument_distributions=arg_dists,
        optional_fill_prob=fill,
        causal_rules=tuple(rules),
    )


def load_simulator_config(
    path: Optional[str] = None, lexicon: Optional[Lexicon] = None
) -> SimulatorConfig:
    """Load a simulator config file, defaulting to the packaged one."""
    if path is None:
        text = resources.files("qaforge.data").joinpath("simulator.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"simulator config line {exc.lineno}: {exc.msg}") from None
    config = config_from_obj(obj)
    validate_config(config, lexicon)
    return config


def write_sessions_jsonl(path: str, sessions: Sequence[GameplaySession]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for session in sessions:
            fh.write(session_to_line(session))
            fh.write("\n")


def ingest_log(path: str, lexicon: Optional[Lexicon] = None) -> list[GameplaySession]:
    """Parse and validate a JSONL session file.

    Malformed lines raise ``LogParseError`` naming the line; invariant
    violations raise ``SessionValidationError`` naming the session.
    """
    sessions = []
    seen_ids: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            session = session_from_line(line, line_no)
            if session.id in seen_ids:
                raise SessionValidationError(f"duplicate session id {session.id}")
            seen_ids.add(session.id)
            if lexicon is not None:
                lexicon.validate_session(session)
            sessions.append(session)
    return sessions
