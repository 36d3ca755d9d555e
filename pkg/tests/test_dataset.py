import json

import pytest

from helpers import counting_log, ev, session
from qaforge.dataset import (
    Example,
    assign_splits,
    cap_duplicates,
    compute_stats,
    example_from_obj,
    example_to_line,
    examples_from_pairs,
    question_tokens,
    read_dataset,
    split_counts,
    stats_to_csv,
    validate_against_oracle,
    write_dataset,
)
from qaforge.generator import QAPair
from qaforge.model import (
    Clip,
    ConfigError,
    EventPattern,
    EventType,
    IntegrityError,
    LogParseError,
    QuestionType,
    Relation,
    Role,
    SemanticChunk,
    Subset,
    TemporalConstraint,
    PROBE_STAGE_TYPE,
)


def mk_pair(question, answer, subset, qtype, chunk, template="t", session_id=1):
    return QAPair(
        question=question,
        answer=answer,
        chunk=chunk,
        subset=Subset(subset),
        qtype=QuestionType(qtype),
        clip=Clip(session_id=session_id, start_ms=0, end_ms=4000,
                  target_event_id=chunk.target_event_id),
        template_id=template,
        session_id=session_id,
    )


def ec_chunk(predicate, hole, args=None, constraint=None, target=1):
    return SemanticChunk(
        qtype=QuestionType.EVENT_CENTRIC,
        predicate=EventType(predicate),
        args={Role(k): v for k, v in (args or {}).items()},
        hole=Role(hole),
        constraint=constraint,
        target_event_id=target,
    )


def after(etype, **roles):
    return TemporalConstraint(
        Relation.AFTER, EventPattern(EventType(etype), {Role(k): v for k, v in roles.items()})
    )


def six_pair_fixture():
    """Two examples per subset with hand-countable distributions."""
    stage_chunk = SemanticChunk(
        qtype=QuestionType.STATE, probe=PROBE_STAGE_TYPE, target_event_id=1
    )
    count_et = SemanticChunk(
        qtype=QuestionType.COUNTING, predicate=EventType.JUMP,
        constraint=after("die"), target_event_id=1,
    )
    count_ht = SemanticChunk(
        qtype=QuestionType.COUNTING, predicate=EventType.JUMP,
        constraint=after("throw", means="shell"), target_event_id=1,
    )
    hit_et = ec_chunk("hit", "patient", constraint=TemporalConstraint(
        Relation.BEFORE, EventPattern(EventType.KILL, {Role.PATIENT: "Goomba"})
    ))
    pairs = [
        mk_pair("What enemy did Mario kill by stomping?", "Para Goomba", "NT",
                "event_centric", ec_chunk("kill", "patient", {"means": "stomping"})),
        mk_pair("What is the type of stage?", "Cave", "NT", "state", stage_chunk),
        mk_pair("How many times did Mario jump after Mario died?", "3", "ET",
                "counting", count_et),
        mk_pair("What did Mario hit before killing Goomba?", "Coin block", "ET",
                "event_centric", hit_et),
        mk_pair("How many times did Mario jump after throwing a shell?", "2", "HT",
                "counting", count_ht),
        mk_pair("Which enemy was killed by Mario's stomp after Mario hit a coin block?",
                "Goomba", "HT", "event_centric",
                ec_chunk("kill", "patient", {"means": "stomping"},
                         constraint=after("hit", patient="coin_block"))),
    ]
    return examples_from_pairs(pairs)


class TestCapDuplicates:
    def duplicates(self, n, question="Where did Mario jump?", answer="Hill"):
        chunk = ec_chunk("jump", "location")
        return [mk_pair(question, answer, "NT", "event_centric", chunk) for _ in range(n)]

    def test_all_distinct_input_unchanged(self):
        examples = six_pair_fixture()
        assert cap_duplicates(examples, 1, seed=0) == examples

    def test_ten_copies_capped_to_three(self):
        examples = examples_from_pairs(self.duplicates(10))
        capped = cap_duplicates(examples, 3, seed=1)
        assert len(capped) == 3

    def test_mixed_multiset_fixed_seed_replayable(self):
        pairs = self.duplicates(7) + [
            mk_pair("What is the type of stage?", "Cave", "NT", "state",
                    SemanticChunk(qtype=QuestionType.STATE, probe=PROBE_STAGE_TYPE,
                                  target_event_id=1)),
            mk_pair("What did Mario eat?", "Coin", "NT", "event_centric",
                    ec_chunk("eat", "patient")),
        ]
        examples = examples_from_pairs(pairs)
        capped = cap_duplicates(examples, 3, seed=99)
        assert [ex.id for ex in capped] == [3, 4, 5, 7, 8]
        assert cap_duplicates(examples, 3, seed=99) == capped

    def test_idempotent(self):
        examples = examples_from_pairs(self.duplicates(9))
        once = cap_duplicates(examples, 4, seed=13)
        assert cap_duplicates(once, 4, seed=13) == once
        assert cap_duplicates(once, 4, seed=999) == once  # already within cap

    def test_relative_order_preserved(self):
        examples = examples_from_pairs(self.duplicates(12))
        capped = cap_duplicates(examples, 5, seed=3)
        ids = [ex.id for ex in capped]
        assert ids == sorted(ids)

    def test_cap_must_be_positive(self):
        with pytest.raises(ConfigError):
            cap_duplicates([], 0, seed=0)


class TestSplitCounts:
    @pytest.mark.parametrize(
        "n,expected",
        [
            (78_297, (46_978, 15_660, 15_659)),
            (64_619, (38_771, 12_924, 12_924)),
            (44_841, (26_904, 8_969, 8_968)),
            (5, (3, 1, 1)),
            (0, (0, 0, 0)),
            (1, (0, 1, 0)),
        ],
    )
    def test_default_ratio_counts(self, n, expected):
        assert split_counts(n) == expected

    def test_counts_always_partition(self):
        for n in range(0, 2000):
            tr, va, te = split_counts(n)
            assert tr + va + te == n and tr >= 0 and va >= 0 and te >= 0

    def test_custom_ratios(self):
        assert split_counts(10, (0.8, 0.1, 0.1)) == (8, 1, 1)

    def test_bad_ratios(self):
        with pytest.raises(ConfigError):
            split_counts(10, (0.5, 0.2, 0.2))
        with pytest.raises(ConfigError):
            split_counts(10, (1.2, -0.1, -0.1))


class TestAssignSplits:
    def test_partition_per_subset(self):
        examples = six_pair_fixture() * 20  # 40 per subset after re-id
        examples = examples_from_pairs([ex.pair for ex in examples])
        split = assign_splits(examples, seed=5)
        for subset in Subset:
            members = [ex for ex in split if ex.pair.subset is subset]
            n = len(members)
            tr, va, te = split_counts(n)
            from collections import Counter

            counts = Counter(ex.split for ex in members)
            assert (counts["train"], counts["valid"], counts["test"]) == (tr, va, te)

    def test_deterministic(self):
        examples = six_pair_fixture() * 10
        examples = examples_from_pairs([ex.pair for ex in examples])
        a = assign_splits(examples, seed=21)
        b = assign_splits(examples, seed=21)
        assert a == b
        c = assign_splits(examples, seed=22)
        assert a != c

    def test_every_example_assigned(self):
        examples = six_pair_fixture()
        split = assign_splits(examples, seed=1)
        assert all(ex.split in ("train", "valid", "test") for ex in split)


class TestSerialization:
    def test_write_read_write_is_byte_identical(self, tmp_path):
        examples = assign_splits(six_pair_fixture(), seed=4)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(str(p1), examples)
        again = read_dataset(str(p1))
        assert again == examples
        write_dataset(str(p2), again)
        assert p1.read_bytes() == p2.read_bytes()

    def test_normative_field_names(self):
        ex = six_pair_fixture()[0]
        obj = json.loads(example_to_line(ex))
        assert set(obj) >= {"q", "a", "subset", "qtype", "session", "clip", "chunk"}
        assert obj["clip"] == [0, 4000]

    def test_missing_field_raises(self):
        ex = six_pair_fixture()[0]
        obj = json.loads(example_to_line(ex))
        del obj["subset"]
        with pytest.raises(LogParseError):
            example_from_obj(obj, line_no=12)

    def test_qtype_must_match_chunk(self):
        ex = six_pair_fixture()[0]
        obj = json.loads(example_to_line(ex))
        obj["qtype"] = "counting"
        with pytest.raises(LogParseError):
            example_from_obj(obj)


class TestComputeStats:
    def test_empty_dataset_is_all_zero(self):
        report = compute_stats([])
        assert report["total_examples"] == 0
        assert report["unique_qa_pairs"] == 0
        assert all(b["examples"] == 0 for b in report["subsets"].values())

    def test_six_pair_hand_tally(self):
        report = compute_stats(six_pair_fixture())
        assert report["total_examples"] == 6
        assert report["unique_qa_pairs"] == 6
        nt = report["subsets"]["NT"]
        assert nt["examples"] == 2
        assert nt["question_types"] == {"event_centric": 1, "state": 1}
        assert nt["event_types"] == {"kill": 1, "stage_type": 1}
        assert nt["answer_classes"] == {"Cave": 1, "Para Goomba": 1}
        assert nt["question_vocabulary_size"] == 12
        et = report["subsets"]["ET"]
        assert et["examples"] == 2
        assert et["question_types"] == {"counting": 1, "event_centric": 1}
        assert et["event_types"] == {"hit": 1, "jump": 1}
        assert et["answer_classes"] == {"3": 1, "Coin block": 1}
        assert et["question_vocabulary_size"] == 13
        ht = report["subsets"]["HT"]
        assert ht["examples"] == 2
        assert ht["event_types"] == {"jump": 1, "kill": 1}
        assert ht["answer_classes"] == {"2": 1, "Goomba": 1}

    def test_ring_totals_are_consistent(self):
        report = compute_stats(six_pair_fixture() * 5)
        for bucket in report["subsets"].values():
            n = bucket["examples"]
            assert sum(bucket["question_types"].values()) == n
            assert sum(bucket["event_types"].values()) == n
            assert sum(bucket["answer_classes"].values()) == n

    def test_mean_events_per_clip_with_sessions(self):
        sess, _ = counting_log()
        report = compute_stats(six_pair_fixture(), {1: sess})
        assert report["mean_events_per_clip"] == 4.0

    def test_dangling_session_reference(self):
        with pytest.raises(IntegrityError):
            compute_stats(six_pair_fixture(), {99: None})

    def test_session_leakage_flag(self):
        examples = six_pair_fixture()
        split = [
            Example(ex.id, ex.pair, "train" if i % 2 else "test")
            for i, ex in enumerate(examples)
        ]
        report = compute_stats(split)
        assert report["session_leakage"]["sessions_spanning_splits"] == 1

    def test_unique_count_bounded_by_total(self):
        examples = six_pair_fixture() * 3
        report = compute_stats(examples)
        assert report["unique_qa_pairs"] == 6 <= report["total_examples"]

    def test_question_tokens(self):
        assert question_tokens("How many times did Mario jump?") == [
            "how", "many", "times", "did", "mario", "jump",
        ]

    def test_csv_rendering(self):
        text = stats_to_csv(compute_stats(six_pair_fixture()))
        assert text.startswith("section,subset,key,value\n")
        assert "examples,NT,examples,2" in text


class TestOracleReplay:
    def test_counting_fixture_dataset_validates(self, lex):
        sess, throw = counting_log()
        chunk = SemanticChunk(
            qtype=QuestionType.COUNTING, predicate=EventType.JUMP,
            constraint=after("throw", means="shell"), target_event_id=throw.id,
        )
        pair = QAPair(
            question="How many times did Mario jump after throwing a shell?",
            answer="2", chunk=chunk, subset=Subset.HT, qtype=QuestionType.COUNTING,
            clip=Clip(session_id=1, start_ms=0, end_ms=4000, target_event_id=throw.id),
            template_id="cnt-jump-c1", session_id=1,
        )
        examples = examples_from_pairs([pair])
        assert validate_against_oracle(examples, {1: sess}, lex) == []
        wrong = examples_from_pairs(
            [QAPair(**{**pair.__dict__, "answer": "3"})]
        )
        violations = validate_against_oracle(wrong, {1: sess}, lex)
        assert len(violations) == 1 and "oracle says '2'" in violations[0]
