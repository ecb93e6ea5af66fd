import sys
from datetime import datetime
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from depfuse.corpus import Tweet, UserRecord


def make_tweet(
    time="2020-03-01 12:00:00",
    text="hello world",
    has_images=False,
    is_original=True,
    likes=0,
    forwards=0,
    comments=0,
):
    return Tweet(
        text=text,
        posting_time=datetime.strptime(time, "%Y-%m-%d %H:%M:%S"),
        has_images=has_images,
        num_likes=likes,
        num_forwards=forwards,
        num_comments=comments,
        is_original=is_original,
    )


def make_user(user_id="u1", label=0, tweets=(), nickname="nick", profile="bio"):
    return UserRecord(
        user_id=user_id,
        nickname=nickname,
        gender="unknown",
        profile=profile,
        birthday=None,
        num_followers=10,
        num_followings=5,
        label=label,
        tweets=tuple(tweets),
    )


@pytest.fixture
def tiny_user():
    return make_user(
        tweets=[
            make_tweet("2020-03-01 01:30:00", "孤独 绝望", is_original=True),
            make_tweet("2020-03-02 13:00:00", "today is fine", has_images=True, is_original=False),
        ]
    )
