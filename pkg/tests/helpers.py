"""Hand-built sessions and clips shared across test modules."""

from __future__ import annotations

from qaforge.model import (
    Clip,
    Event,
    EventType,
    GameplaySession,
    MarioState,
    MarioStateInterval,
    Role,
)


def ev(eid: int, etype: str, t: int, **roles: str) -> Event:
    return Event(
        id=eid,
        etype=EventType(etype),
        time_ms=t,
        args={Role(k): v for k, v in roles.items()},
    )


def session(
    events,
    duration_ms: int,
    stage: str = "overground",
    states=None,
    sid: int = 1,
) -> GameplaySession:
    """Build a session; default timeline is a single 'small' interval."""
    if states is None:
        states = [("small", 0, duration_ms)] if duration_ms > 0 else []
    timeline = tuple(
        MarioStateInterval(MarioState(s), start, end) for s, start, end in states
    )
    ordered = tuple(sorted(events, key=lambda e: (e.time_ms, e.id)))
    return GameplaySession(
        id=sid,
        stage_type=stage,
        duration_ms=duration_ms,
        events=ordered,
        state_timeline=timeline,
    )


def whole_clip(sess: GameplaySession, target_id: int) -> Clip:
    return Clip(
        session_id=sess.id,
        start_ms=0,
        end_ms=sess.duration_ms,
        target_event_id=target_id,
    )


def eight_event_session() -> GameplaySession:
    """Ten-second log with eight events; window [2000, 5000] holds five."""
    return session(
        [
            ev(1, "jump", 800),
            ev(2, "kill", 2000, patient="Goomba", means="stomping"),
            ev(3, "appear", 2500, agent="GKoopaTroopa"),
            ev(4, "hit", 3100, patient="coin_block"),
            ev(5, "eat", 4400, patient="coin"),
            ev(6, "jump", 5000),
            ev(7, "throw", 7500, means="shell"),
            ev(8, "die", 9100, means="pit"),
        ],
        duration_ms=10_000,
    )


def counting_log() -> tuple[GameplaySession, Event]:
    """Jumps at 500/1500/2000 ms with throw(shell) at 1000 ms.

    The jump count is 3 unconstrained and 2 after the throw.
    """
    throw = ev(2, "throw", 1000, means="shell")
    sess = session(
        [ev(1, "jump", 500), throw, ev(3, "jump", 1500), ev(4, "jump", 2000)],
        duration_ms=4000,
    )
    return sess, throw


def fig_style_session() -> tuple[GameplaySession, Event]:
    """Eight-event clip whose only kill is kill(PGoomba, stomping)."""
    kill = ev(4, "kill", 2500, patient="PGoomba", means="stomping")
    sess = session(
        [
            ev(1, "appear", 800, agent="GKoopaTroopa"),
            ev(2, "hit", 1200, patient="coin_block"),
            ev(3, "jump", 2100),
            kill,
            ev(5, "eat", 3000, patient="coin"),
            ev(6, "throw", 3600, means="shell"),
            ev(7, "jump", 3900),
            ev(8, "kick", 4200, patient="shell"),
        ],
        duration_ms=4500,
    )
    return sess, kill
