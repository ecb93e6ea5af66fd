"""Seeded synthetic timeline generator.

Produces labeled user records whose behavioral statistics carry a
class-conditional signal along all six feature dimensions, so the whole
pipeline can be exercised and accepted without any real corpus. The
generator is a test oracle, not a clinical simulator.

Every random draw comes from SplitMix64 streams derived from the dataset
seed (one sub-stream per user), so a fixed SynthDatasetSpec expands to a
byte-identical corpus on any platform.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta
from typing import List, Tuple

from .corpus import LABEL_DEPRESSED, LABEL_NORMAL, Tweet, UserRecord
from .errors import ConfigError
from .rng import STREAM_SYNTH, SplitMix64, derive_seed

# Timeline anchor for generated timestamps (naive local time).
_EPOCH = datetime(2020, 1, 1, 0, 0, 0)

_LATE_NIGHT_SECONDS = 6 * 3600
_DAY_SECONDS = 24 * 3600

# Negative pool terms must tokenize into entries of the default feature
# lexicon; neutral pool terms must stay disjoint from it.
NEGATIVE_POOL = (
    "孤独",
    "绝望",
    "疲惫",
    "痛苦",
    "失眠",
    "难过",
    "崩溃",
    "无助",
    "hopeless",
    "exhausted",
    "lonely",
)

NEUTRAL_POOL = (
    "今天",
    "天气",
    "电影",
    "音乐",
    "旅行",
    "朋友",
    "工作",
    "学习",
    "运动",
    "美食",
    "sunny",
    "coffee",
    "weekend",
)

_NICKNAME_POOL = ("星河", "晨光", "远方", "clover", "nova", "echo", "苔原", "小舟")
_PROFILE_POOL = ("记录生活", "热爱电影", "慢慢来", "exploring", "just here", "")


@dataclass(frozen=True)
class ClassParams:
    """Per-class behavioral rates; tweet and span counts are inclusive ranges."""

    late_night_rate: float
    negative_word_rate: float
    original_rate: float
    image_rate: float
    tweets_per_user: Tuple[int, int] = (20, 40)
    span_days: Tuple[int, int] = (14, 28)

    def validate(self) -> None:
        for name in ("late_night_rate", "negative_word_rate", "original_rate", "image_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        for name in ("tweets_per_user", "span_days"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} range ({lo}, {hi}) is empty or non-positive")


@dataclass(frozen=True)
class SynthParams:
    normal: ClassParams
    depressed: ClassParams
    neutral_pool: Tuple[str, ...] = NEUTRAL_POOL
    negative_pool: Tuple[str, ...] = NEGATIVE_POOL

    def for_label(self, label: int) -> ClassParams:
        return self.depressed if label == LABEL_DEPRESSED else self.normal

    def validate(self) -> None:
        self.normal.validate()
        self.depressed.validate()
        if not self.neutral_pool or not self.negative_pool:
            raise ConfigError("word pools must be non-empty")


DEFAULT_PARAMS = SynthParams(
    normal=ClassParams(
        late_night_rate=0.1, negative_word_rate=0.1, original_rate=0.5, image_rate=0.5
    ),
    depressed=ClassParams(
        late_night_rate=0.8, negative_word_rate=0.7, original_rate=0.9, image_rate=0.2
    ),
)


@dataclass(frozen=True)
class SynthDatasetSpec:
    n_per_class: int
    seed: int
    params: SynthParams = DEFAULT_PARAMS


def generate_user(class_label: int, params: SynthParams, rng: SplitMix64) -> UserRecord:
    """One labeled user. Each tweet independently lands in the late-night
    window with the class rate, is negative-worded with the class rate (the
    whole tweet draws from one pool, so the tweet-level negativity is an
    exact Bernoulli trial), and flips images/originality per class."""
    cp = params.for_label(class_label)
    n_tweets = rng.randint(*cp.tweets_per_user)
    span = rng.randint(*cp.span_days)
    tweets: List[Tweet] = []
    for _ in range(n_tweets):
        day = rng.randrange(span)
        if rng.bernoulli(cp.late_night_rate):
            seconds = rng.randrange(_LATE_NIGHT_SECONDS)
        else:
            seconds = _LATE_NIGHT_SECONDS + rng.randrange(_DAY_SECONDS - _LATE_NIGHT_SECONDS)
        pool = params.negative_pool if rng.bernoulli(cp.negative_word_rate) else params.neutral_pool
        words = [rng.choice(pool) for _ in range(rng.randint(3, 8))]
        tweets.append(
            Tweet(
                text=" ".join(words),
                posting_time=_EPOCH + timedelta(days=day, seconds=seconds),
                has_images=rng.bernoulli(cp.image_rate),
                num_likes=rng.randrange(200),
                num_forwards=rng.randrange(50),
                num_comments=rng.randrange(50),
                is_original=rng.bernoulli(cp.original_rate),
            )
        )
    tweets.sort(key=lambda t: t.posting_time)
    birthday = None
    if rng.bernoulli(0.7):
        birthday = f"{rng.randint(1970, 2005)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
    return UserRecord(
        user_id=f"u{rng.next_u64():016x}",
        nickname=rng.choice(_NICKNAME_POOL),
        gender=rng.choice(("m", "f", "unknown")),
        profile=rng.choice(_PROFILE_POOL),
        birthday=birthday,
        num_followers=rng.randrange(5000),
        num_followings=rng.randrange(2000),
        label=class_label,
        tweets=tuple(tweets),
    )


def generate_dataset(spec: SynthDatasetSpec) -> List[UserRecord]:
    """Balanced, deterministically shuffled records with unique user ids."""
    if spec.n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {spec.n_per_class}")
    spec.params.validate()
    records: List[UserRecord] = []
    for label in (LABEL_NORMAL, LABEL_DEPRESSED):
        for i in range(spec.n_per_class):
            rng = SplitMix64(derive_seed(spec.seed, STREAM_SYNTH, label, i))
            records.append(generate_user(label, spec.params, rng))
    ids = {r.user_id for r in records}
    if len(ids) != len(records):
        raise ConfigError("user_id collision in generated dataset; change the seed")
    SplitMix64(derive_seed(spec.seed, STREAM_SYNTH)).shuffle(records)
    return records


def spec_to_json(spec: SynthDatasetSpec) -> str:
    """Provenance sidecar for a generated corpus."""
    return json.dumps(asdict(spec), sort_keys=True, ensure_ascii=False, indent=2) + "\n"
