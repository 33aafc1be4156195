from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest

from vidsift.core import TitleSkillPair, VideoRecord

REPO = Path(__file__).resolve().parent.parent

MINIMAL_FIXTURES = REPO / "fixtures" / "minimal"
CORPUS = REPO / "fixtures" / "corpus"
CORPUS_SOURCES = CORPUS / "sources"


def utc(year, month, day, hour=0, minute=0, second=0):
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def make_video(video_id="vid-1", *, views=100, likes=10, dislikes=1, comments=5,
               duration=300, title="A Video", description="About things.",
               published=None, fetched=None, language="en", category="27"):
    return VideoRecord(
        video_id=video_id,
        title=title,
        description=description,
        published_at=published or utc(2019, 1, 1),
        duration_s=duration,
        view_count=views,
        like_count=likes,
        dislike_count=dislikes,
        comment_count=comments,
        category_id=category,
        language=language,
        fetched_at=fetched or utc(2019, 6, 1),
    )


@pytest.fixture
def tm_pair():
    return TitleSkillPair(job_title="Executive Assistant", skill="Time Management")
