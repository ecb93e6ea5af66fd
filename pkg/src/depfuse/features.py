"""The six per-user behavioral statistics and their normalization.

Fixed feature order (the component order of StatFeatureVector):

    1. p_original       fraction of original (non-retweet) posts
    2. p_late_night     fraction of posts in the [00:00, 06:00) window
    3. posts_per_week   posting frequency, posts / week
    4. posting_time_sd  population SD of time-of-day, in minutes
    5. p_negative       fraction of posts a sentiment scorer flags negative
    6. image_freq       fraction of posts carrying images

A user with an empty timeline maps to the all-zero vector: no posts, no
behavioral signal (this deliberately bypasses the one-day observation floor
of posts_per_week).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Protocol, Sequence, Set

import numpy as np

from .corpus import Tweet, UserRecord
from .errors import ConfigError, FeatureError
from .text import tokenize

FEATURE_NAMES = (
    "p_original",
    "p_late_night",
    "posts_per_week",
    "posting_time_sd",
    "p_negative",
    "image_freq",
)

N_FEATURES = len(FEATURE_NAMES)

LATE_NIGHT_END_SECONDS = 6 * 3600  # window is [00:00:00, 06:00:00)

DEFAULT_NEGATIVITY_THRESHOLD = 0.5

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class StatFeatureVector:
    p_original: float
    p_late_night: float
    posts_per_week: float
    posting_time_sd: float
    p_negative: float
    image_freq: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.p_original,
                self.p_late_night,
                self.posts_per_week,
                self.posting_time_sd,
                self.p_negative,
                self.image_freq,
            ],
            dtype=np.float64,
        )


class SentimentScorer(Protocol):
    """Deterministic, total map from any unicode string to negativity in [0, 1]."""

    name: str

    def score(self, text: str) -> float: ...


class LexiconScorer:
    """Token-ratio negativity: lexicon hits / token count.

    Lexicon terms pass through the shared tokenizer when the scorer is built,
    so a multi-character CJK entry matches its per-codepoint tokens.
    """

    def __init__(self, lexicon: Iterable[str], name: str = "lexicon"):
        terms: Set[str] = set()
        for term in lexicon:
            terms.update(tokenize(term))
        if not terms:
            raise ConfigError("lexicon is empty after tokenization")
        self.tokens = frozenset(terms)
        self.name = name

    def score(self, text: str) -> float:
        return lexicon_score(text, self.tokens)


def lexicon_score(text: str, lexicon: Set[str]) -> float:
    """hits / tokens for a pre-tokenized lexicon term set; empty text -> 0."""
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    hits = sum(1 for t in tokens if t in lexicon)
    return hits / len(tokens)


def load_lexicon(stream) -> Set[str]:
    """Read a lexicon file: UTF-8, one term per line, '#' comments."""
    terms: Set[str] = set()
    for raw in stream:
        line = raw.split("#", 1)[0].strip()
        if line:
            terms.add(line)
    return terms


def default_lexicon() -> Set[str]:
    text = resources.files("depfuse").joinpath("data/negative_lexicon.txt").read_text("utf-8")
    return load_lexicon(text.splitlines())


def default_scorer() -> LexiconScorer:
    return LexiconScorer(default_lexicon(), name="default-lexicon")


def proportion_original(tweets: Sequence[Tweet]) -> float:
    if not tweets:
        return 0.0
    return sum(1 for t in tweets if t.is_original) / len(tweets)


def proportion_late_night(tweets: Sequence[Tweet]) -> float:
    if not tweets:
        return 0.0
    count = 0
    for t in tweets:
        when = t.posting_time
        seconds = when.hour * 3600 + when.minute * 60 + when.second
        if seconds < LATE_NIGHT_END_SECONDS:
            count += 1
    return count / len(tweets)


def posts_per_week(tweets: Sequence[Tweet]) -> float:
    """Total posts / observed weeks.

    The observation span is (last - first) posting time in fractional days,
    floored at one day so short bursts do not blow up; 0.43 weeks for a
    3-day span falls out of the exact 3/7 fraction. A single tweet therefore
    scores 7.0 (one post over the one-day floor)."""
    if not tweets:
        return 0.0
    first = min(t.posting_time for t in tweets)
    last = max(t.posting_time for t in tweets)
    span_days = (last - first).total_seconds() / 86400.0
    weeks = max(span_days, 1.0) / 7.0
    return len(tweets) / weeks


def posting_time_sd(tweets: Sequence[Tweet]) -> float:
    """Population standard deviation of time-of-day in minutes since midnight.

    Sums use math.fsum (exactly rounded), so the result is independent of
    tweet order down to the last bit."""
    if len(tweets) <= 1:
        return 0.0
    minutes = [
        t.posting_time.hour * 60.0 + t.posting_time.minute + t.posting_time.second / 60.0
        for t in tweets
    ]
    mean = math.fsum(minutes) / len(minutes)
    variance = math.fsum((m - mean) ** 2 for m in minutes) / len(minutes)
    return math.sqrt(variance)


def proportion_negative(
    tweets: Sequence[Tweet],
    scorer: SentimentScorer,
    threshold: float = DEFAULT_NEGATIVITY_THRESHOLD,
) -> float:
    """Fraction of tweets whose negativity score strictly exceeds threshold."""
    if not (0.0 <= threshold <= 1.0):
        raise ConfigError(f"negativity threshold must be in [0, 1], got {threshold}")
    if not tweets:
        return 0.0
    count = 0
    for i, t in enumerate(tweets):
        try:
            value = scorer.score(t.text)
        except Exception as exc:
            raise FeatureError(f"sentiment scorer failed on tweet {i}: {exc}") from exc
        if value > threshold:
            count += 1
    return count / len(tweets)


def image_frequency(tweets: Sequence[Tweet]) -> float:
    if not tweets:
        return 0.0
    return sum(1 for t in tweets if t.has_images) / len(tweets)


def extract_features(
    user: UserRecord,
    scorer: SentimentScorer,
    threshold: float = DEFAULT_NEGATIVITY_THRESHOLD,
) -> StatFeatureVector:
    """Compose the six statistics in their fixed order."""
    if not user.tweets:
        return StatFeatureVector(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    return StatFeatureVector(
        p_original=proportion_original(user.tweets),
        p_late_night=proportion_late_night(user.tweets),
        posts_per_week=posts_per_week(user.tweets),
        posting_time_sd=posting_time_sd(user.tweets),
        p_negative=proportion_negative(user.tweets, scorer, threshold),
        image_freq=image_frequency(user.tweets),
    )


@dataclass(frozen=True)
class FeatureNormalizer:
    """Per-component z-score parameters, fitted on training records only."""

    mean: np.ndarray  # shape (6,)
    std: np.ndarray  # shape (6,), floored at STD_FLOOR


def fit_normalizer(train_vectors: Sequence[StatFeatureVector]) -> FeatureNormalizer:
    if len(train_vectors) < 2:
        raise ConfigError(f"normalizer needs >= 2 vectors, got {len(train_vectors)}")
    matrix = np.stack([v.as_array() for v in train_vectors])
    mean = matrix.mean(axis=0)
    std = np.maximum(matrix.std(axis=0), STD_FLOOR)
    return FeatureNormalizer(mean=mean, std=std)


def apply_normalizer(vector: StatFeatureVector, norm: FeatureNormalizer) -> np.ndarray:
    return (vector.as_array() - norm.mean) / norm.std


def invert_normalizer(normalized: np.ndarray, norm: FeatureNormalizer) -> np.ndarray:
    return normalized * norm.std + norm.mean
