import pytest
from hypothesis import given, strategies as st

from helpers import counting_log, ev, fig_style_session, session, whole_clip
from qaforge import oracle
from qaforge.model import (
    Clip,
    DanglingReferenceError,
    EventPattern,
    EventType,
    QuestionType,
    Relation,
    Role,
    SemanticChunk,
    TemporalConstraint,
    PROBE_MARIO_STATE,
    PROBE_STAGE_TYPE,
)


def pattern(etype, **roles):
    return EventPattern(EventType(etype), {Role(k): v for k, v in roles.items()})


class TestMatchEvents:
    def test_single_stomping_kill_matches(self):
        sess, kill = fig_style_session()
        clip = whole_clip(sess, kill.id)
        matches = oracle.match_events(pattern("kill", means="stomping"), clip, sess)
        assert [e.id for e in matches] == [kill.id]

    def test_fully_wildcarded_pattern_matches_all_of_type(self):
        sess, _ = counting_log()
        clip = whole_clip(sess, 1)
        matches = oracle.match_events(pattern("jump"), clip, sess)
        assert [e.id for e in matches] == [1, 3, 4]

    def test_contradictory_argument_matches_nothing(self):
        sess, kill = fig_style_session()
        clip = whole_clip(sess, kill.id)
        assert oracle.match_events(pattern("kill", means="fireball"), clip, sess) == ()

    def test_pattern_role_absent_from_event_does_not_match(self):
        sess = session([ev(1, "jump", 500)], duration_ms=4000)
        clip = whole_clip(sess, 1)
        assert oracle.match_events(pattern("jump", location="hill"), clip, sess) == ()


class TestApplyConstraint:
    def test_after_throw_keeps_two_of_three_jumps(self):
        sess, throw = counting_log()
        clip = whole_clip(sess, throw.id)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        kept = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.AFTER, pattern("throw", means="shell")),
            clip, sess,
        )
        assert [e.time_ms for e in kept] == [1500, 2000]

    def test_before_reference_at_time_zero_keeps_nothing(self):
        sess = session(
            [ev(1, "throw", 0, means="shell"), ev(2, "jump", 500), ev(3, "jump", 900)],
            duration_ms=4000,
        )
        clip = whole_clip(sess, 1)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        kept = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.BEFORE, pattern("throw")), clip, sess
        )
        assert kept == ()

    def test_when_with_zero_offset_is_kept(self):
        sess = session(
            [ev(1, "appear", 1000, agent="Goomba"), ev(2, "jump", 1000)],
            duration_ms=4000,
        )
        clip = whole_clip(sess, 2)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        kept = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.WHEN, pattern("appear")), clip, sess
        )
        assert [e.id for e in kept] == [2]

    def test_when_tolerance_boundary(self):
        sess = session(
            [ev(1, "appear", 1000, agent="Goomba"), ev(2, "jump", 1250), ev(3, "jump", 1251)],
            duration_ms=4000,
        )
        clip = whole_clip(sess, 1)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        kept = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.WHEN, pattern("appear")), clip, sess
        )
        assert [e.id for e in kept] == [2]

    def test_ties_excluded_from_before_and_after(self):
        sess = session(
            [ev(1, "throw", 1000, means="shell"), ev(2, "jump", 1000)], duration_ms=4000
        )
        clip = whole_clip(sess, 1)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        for relation in (Relation.BEFORE, Relation.AFTER):
            kept = oracle.apply_constraint(
                jumps, TemporalConstraint(relation, pattern("throw")), clip, sess
            )
            assert kept == ()

    def test_multiple_references_use_outermost_times(self):
        sess = session(
            [
                ev(1, "throw", 1000, means="shell"),
                ev(2, "jump", 1500),
                ev(3, "throw", 2000, means="shell"),
                ev(4, "jump", 2500),
            ],
            duration_ms=4000,
        )
        clip = whole_clip(sess, 1)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        after = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.AFTER, pattern("throw")), clip, sess
        )
        assert [e.id for e in after] == [4]  # strictly after the latest throw
        before = oracle.apply_constraint(
            jumps, TemporalConstraint(Relation.BEFORE, pattern("throw")), clip, sess
        )
        assert before == ()  # nothing strictly before the earliest throw

    def test_dangling_reference(self):
        sess, throw = counting_log()
        clip = whole_clip(sess, throw.id)
        jumps = oracle.match_events(pattern("jump"), clip, sess)
        with pytest.raises(DanglingReferenceError):
            oracle.apply_constraint(
                jumps, TemporalConstraint(Relation.AFTER, pattern("die")), clip, sess
            )


class TestAnswer:
    def test_event_centric_stomping_kill(self, lex):
        sess, kill = fig_style_session()
        clip = whole_clip(sess, kill.id)
        chunk = SemanticChunk(
            qtype=QuestionType.EVENT_CENTRIC,
            predicate=EventType.KILL,
            args={Role.MEANS: "stomping"},
            hole=Role.PATIENT,
        )
        assert oracle.answer(chunk, clip, sess, lex) == {"Para Goomba"}

    def test_counting_five_fireballs(self, lex):
        events = [ev(i, "shoot", 500 + 700 * i, means="fireball") for i in range(1, 6)]
        sess = session(events, duration_ms=5000,
                       states=[("fire_form", 0, 5000)])
        clip = whole_clip(sess, 1)
        chunk = SemanticChunk(
            qtype=QuestionType.COUNTING,
            predicate=EventType.SHOOT,
            args={Role.MEANS: "fireball"},
        )
        assert oracle.answer(chunk, clip, sess, lex) == {"5"}

    def test_counting_drops_from_three_to_two_after_throw(self, lex):
        sess, throw = counting_log()
        clip = whole_clip(sess, throw.id)
        bare = SemanticChunk(qtype=QuestionType.COUNTING, predicate=EventType.JUMP)
        assert oracle.answer(bare, clip, sess, lex) == {"3"}
        constrained = SemanticChunk(
            qtype=QuestionType.COUNTING,
            predicate=EventType.JUMP,
            constraint=TemporalConstraint(
                Relation.AFTER, pattern("throw", means="shell")
            ),
        )
        assert oracle.answer(constrained, clip, sess, lex) == {"2"}

    def test_stage_probe(self, lex):
        sess = session([ev(1, "jump", 100)], duration_ms=4000, stage="cave")
        chunk = SemanticChunk(qtype=QuestionType.STATE, probe=PROBE_STAGE_TYPE)
        assert oracle.answer(chunk, whole_clip(sess, 1), sess, lex) == {"Cave"}

    def test_state_probe_with_when_reference(self, lex):
        sess = session(
            [ev(1, "eat", 2000, patient="mushroom")],
            duration_ms=5000,
            states=[("small", 0, 1500), ("fire_form", 1500, 5000)],
        )
        chunk = SemanticChunk(
            qtype=QuestionType.STATE,
            probe=PROBE_MARIO_STATE,
            constraint=TemporalConstraint(
                Relation.WHEN, pattern("eat", patient="mushroom")
            ),
        )
        assert oracle.answer(chunk, whole_clip(sess, 1), sess, lex) == {"Fire form"}

    def test_unconstrained_state_probe_returns_all_overlapping(self, lex):
        sess = session(
            [ev(1, "jump", 100)],
            duration_ms=5000,
            states=[("small", 0, 2000), ("super", 2000, 5000)],
        )
        chunk = SemanticChunk(qtype=QuestionType.STATE, probe=PROBE_MARIO_STATE)
        assert oracle.answer(chunk, whole_clip(sess, 1), sess, lex) == {"Small", "Super"}

    def test_event_centric_requires_hole_role_filled(self, lex):
        # The kill without a location cannot answer a location question.
        sess = session(
            [
                ev(1, "kill", 1000, patient="Goomba", means="stomping"),
                ev(2, "kill", 2000, patient="Spiky", means="shell", location="hill"),
            ],
            duration_ms=4000,
        )
        chunk = SemanticChunk(
            qtype=QuestionType.EVENT_CENTRIC,
            predicate=EventType.KILL,
            args={},
            hole=Role.LOCATION,
        )
        assert oracle.answer(chunk, whole_clip(sess, 1), sess, lex) == {"Hill"}


class TestIsUnique:
    def test_two_kills_with_different_patients_not_unique(self, lex):
        sess = session(
            [
                ev(1, "kill", 1000, patient="Goomba", means="stomping"),
                ev(2, "hit", 1500, patient="coin_block"),
                ev(3, "kill", 2000, patient="Spiky", means="stomping"),
            ],
            duration_ms=4000,
        )
        clip = whole_clip(sess, 1)
        chunk = SemanticChunk(
            qtype=QuestionType.EVENT_CENTRIC,
            predicate=EventType.KILL,
            args={Role.MEANS: "stomping"},
            hole=Role.PATIENT,
        )
        assert not oracle.is_unique(chunk, clip, sess, lex)
        isolated = SemanticChunk(
            qtype=QuestionType.EVENT_CENTRIC,
            predicate=EventType.KILL,
            args={Role.MEANS: "stomping"},
            hole=Role.PATIENT,
            constraint=TemporalConstraint(
                Relation.AFTER, pattern("hit", patient="coin_block")
            ),
        )
        assert oracle.is_unique(isolated, clip, sess, lex)
        assert oracle.answer(isolated, clip, sess, lex) == {"Spiky"}

    def test_counting_is_always_unique(self, lex):
        sess, throw = counting_log()
        chunk = SemanticChunk(qtype=QuestionType.COUNTING, predicate=EventType.JUMP)
        assert oracle.is_unique(chunk, whole_clip(sess, throw.id), sess, lex)

    def test_dangling_reference_is_not_unique(self, lex):
        sess, throw = counting_log()
        chunk = SemanticChunk(
            qtype=QuestionType.COUNTING,
            predicate=EventType.JUMP,
            constraint=TemporalConstraint(Relation.AFTER, pattern("die")),
        )
        assert not oracle.is_unique(chunk, whole_clip(sess, throw.id), sess, lex)


class TestMonotonicity:
    @given(
        st.lists(st.integers(0, 3999), min_size=0, max_size=8),
        st.sampled_from(list(Relation)),
        st.integers(0, 3999),
    )
    def test_constraints_never_enlarge_the_matched_set(self, times, relation, ref_t):
        events = [ev(i + 1, "jump", t) for i, t in enumerate(sorted(times))]
        ref = ev(len(events) + 1, "throw", ref_t, means="shell")
        sess = session(events + [ref], duration_ms=4000)
        clip = whole_clip(sess, ref.id)
        candidates = oracle.match_events(pattern("jump"), clip, sess)
        kept = oracle.apply_constraint(
            candidates, TemporalConstraint(relation, pattern("throw")), clip, sess
        )
        assert set(e.id for e in kept) <= set(e.id for e in candidates)
