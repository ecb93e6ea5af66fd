import json
from datetime import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_user
from depfuse.corpus import (
    ParseIssue,
    SplitSpec,
    parse_corpus,
    record_to_obj,
    serialize_records,
    split_dataset,
)
from depfuse.errors import ConfigError, DataFormatError


def valid_line(user_id="u1", label=0, tweets=None, **overrides):
    if tweets is None:
        tweets = [
            {
                "text": "hi",
                "posting_time": "2020-03-02 08:00:00",
                "has_images": False,
                "num_likes": 1,
                "num_forwards": 0,
                "num_comments": 0,
                "is_original": True,
            },
            {
                "text": "bye",
                "posting_time": "2020-03-01 09:00:00",
                "has_images": False,
                "num_likes": 0,
                "num_forwards": 2,
                "num_comments": 1,
                "is_original": False,
            },
        ]
    obj = {
        "user_id": user_id,
        "nickname": "nick",
        "gender": "f",
        "profile": "",
        "birthday": None,
        "num_followers": 3,
        "num_followings": 4,
        "label": label,
        "tweets": tweets,
    }
    obj.update(overrides)
    return obj


def as_bytes(*objs):
    return ("\n".join(json.dumps(o, ensure_ascii=False) for o in objs) + "\n").encode()


class TestParse:
    def test_tweets_sorted_by_posting_time(self):
        records, issues = parse_corpus(as_bytes(valid_line()))
        assert issues == []
        assert [t.posting_time for t in records[0].tweets] == [
            datetime(2020, 3, 1, 9, 0, 0),
            datetime(2020, 3, 2, 8, 0, 0),
        ]

    def test_missing_label_reported(self):
        obj = valid_line()
        del obj["label"]
        records, issues = parse_corpus(as_bytes(obj))
        assert records == []
        assert issues == [ParseIssue(1, "missing field: label")]

    def test_invalid_json_line_skipped(self):
        payload = (
            json.dumps(valid_line("a")) + "\n" + "{not json}\n" + json.dumps(valid_line("b")) + "\n"
        ).encode()
        records, issues = parse_corpus(payload)
        assert [r.user_id for r in records] == ["a", "b"]
        assert len(issues) == 1 and issues[0].line == 2

    def test_duplicate_user_id_skips_later_line(self):
        records, issues = parse_corpus(as_bytes(valid_line("same"), valid_line("same")))
        assert len(records) == 1
        assert issues[0].line == 2 and "duplicate user_id" in issues[0].reason

    def test_empty_text_requires_images(self):
        bad = valid_line(
            tweets=[
                {
                    "text": "",
                    "posting_time": "2020-01-01 00:00:00",
                    "has_images": False,
                    "num_likes": 0,
                    "num_forwards": 0,
                    "num_comments": 0,
                    "is_original": True,
                }
            ]
        )
        records, issues = parse_corpus(as_bytes(bad))
        assert records == [] and len(issues) == 1

        ok = valid_line(tweets=[dict(bad["tweets"][0], has_images=True)])
        records, issues = parse_corpus(as_bytes(ok))
        assert len(records) == 1 and issues == []

    @pytest.mark.parametrize(
        "mutation",
        [
            {"gender": "x"},
            {"label": 2},
            {"num_followers": -1},
            {"birthday": 5},
            {"tweets": "nope"},
        ],
    )
    def test_bad_field_values_reported(self, mutation):
        records, issues = parse_corpus(as_bytes(valid_line(**mutation)))
        assert records == [] and len(issues) == 1

    def test_bad_timestamp_reported(self):
        bad = valid_line()
        bad["tweets"][0]["posting_time"] = "2020/03/02 08:00"
        records, issues = parse_corpus(as_bytes(bad))
        assert records == [] and "posting_time" in issues[0].reason

    def test_unknown_keys_ignored(self):
        records, issues = parse_corpus(as_bytes(valid_line(extra_field=1)))
        assert len(records) == 1 and issues == []

    def test_unreadable_source_is_fatal(self):
        class FailingStream:
            def readlines(self):
                raise OSError("device gone")

        with pytest.raises(DataFormatError, match="unreadable"):
            parse_corpus(FailingStream())

    def test_invalid_utf8_line_skipped(self):
        payload = json.dumps(valid_line("a")).encode() + b"\n\xff\xfe broken \xff\n"
        records, issues = parse_corpus(payload)
        assert [r.user_id for r in records] == ["a"]
        assert len(issues) == 1 and "UTF-8" in issues[0].reason


times = st.datetimes(
    min_value=datetime(1990, 1, 1), max_value=datetime(2049, 12, 31)
).map(lambda d: d.replace(microsecond=0))

tweet_objs = st.builds(
    lambda text, time, imgs, likes, fwd, com, orig: {
        "text": text if (text or imgs) else "x",
        "posting_time": time.strftime("%Y-%m-%d %H:%M:%S"),
        "has_images": imgs,
        "num_likes": likes,
        "num_forwards": fwd,
        "num_comments": com,
        "is_original": orig,
    },
    st.text(max_size=20),
    times,
    st.booleans(),
    st.integers(0, 10**6),
    st.integers(0, 100),
    st.integers(0, 100),
    st.booleans(),
)

record_objs = st.builds(
    lambda uid, nick, gender, profile, birthday, nf, ng, label, tweets: valid_line(
        user_id=uid,
        label=label,
        tweets=tweets,
        nickname=nick,
        gender=gender,
        profile=profile,
        birthday=birthday,
        num_followers=nf,
        num_followings=ng,
    ),
    st.text(min_size=1, max_size=12),
    st.text(max_size=8),
    st.sampled_from(["m", "f", "unknown"]),
    st.text(max_size=16),
    st.none() | st.text(max_size=10),
    st.integers(0, 10**6),
    st.integers(0, 10**6),
    st.integers(0, 1),
    st.lists(tweet_objs, max_size=6),
)


class TestRoundTrip:
    @given(record_objs)
    @settings(max_examples=60, deadline=None)
    def test_serialize_parse_round_trip(self, obj):
        records, issues = parse_corpus(as_bytes(obj))
        assert issues == []
        again, issues = parse_corpus(serialize_records(records))
        assert issues == []
        assert again == records
        assert record_to_obj(again[0])["tweets"] == sorted(
            record_to_obj(records[0])["tweets"], key=lambda t: t["posting_time"]
        )


def stub_records(labels):
    return [make_user(user_id=f"u{i}", label=label) for i, label in enumerate(labels)]


class TestSplit:
    def test_paper_scale_sizes(self):
        records = stub_records([0] * 10_000 + [1] * 10_000)
        train, val = split_dataset(records, SplitSpec(ratio=0.8, seed=3))
        assert (len(train), len(val)) == (16_000, 4_000)

    def test_small_stratified_counts(self):
        records = stub_records([0, 1] * 5)
        train, val = split_dataset(records, SplitSpec(ratio=0.8, seed=1))
        assert (len(train), len(val)) == (8, 2)
        assert sum(1 for r in train if r.label == 0) == 4
        assert sum(1 for r in train if r.label == 1) == 4
        assert sum(1 for r in val if r.label == 0) == 1

    def test_same_seed_identical(self):
        records = stub_records([0, 1, 0, 1, 0, 1, 0, 1])
        first = split_dataset(records, SplitSpec(ratio=0.5, seed=42))
        second = split_dataset(records, SplitSpec(ratio=0.5, seed=42))
        assert first == second

    def test_bad_ratio_rejected(self):
        records = stub_records([0, 1])
        for ratio in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ConfigError):
                split_dataset(records, SplitSpec(ratio=ratio, seed=0))
        with pytest.raises(ConfigError):
            split_dataset([], SplitSpec(ratio=0.5, seed=0))

    @given(
        st.lists(st.integers(0, 1), min_size=1, max_size=60),
        st.floats(0.05, 0.95),
        st.integers(0, 2**64 - 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_disjoint_union_and_class_balance(self, labels, ratio, seed):
        records = stub_records(labels)
        train, val = split_dataset(records, SplitSpec(ratio=ratio, seed=seed))
        train_ids = {r.user_id for r in train}
        val_ids = {r.user_id for r in val}
        assert train_ids.isdisjoint(val_ids)
        assert train_ids | val_ids == {r.user_id for r in records}
        for label in (0, 1):
            class_size = sum(1 for r in records if r.label == label)
            got = sum(1 for r in train if r.label == label)
            assert abs(got - ratio * class_size) <= 1
