"""Video-search backends: a remote search-API client and an offline fixture
source that replays recorded pages. Both expose the same two calls —
search(query, page_token) and fetch_details(ids) — so harvesting code cannot
tell them apart.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import requests

from .core import ValidationError, VideoRecord, parse_utc, utcnow
from .querygen import SearchQuery

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "VIDEO_API_KEY"
DETAIL_BATCH_LIMIT = 50

RETRY_ATTEMPTS = 3
RETRY_BASE_MS = 500


class SourceError(Exception):
    pass


class TransportError(SourceError):
    """Raised after retries are exhausted on transient transport failures."""


class QuotaExceededError(SourceError):
    """Terminal: the backend refused the call for quota reasons."""

    def __init__(self, query_text: str):
        super().__init__(f"quota exceeded while searching {query_text!r}")
        self.query_text = query_text


class UnknownFixtureKeyError(SourceError):
    pass


class MissingApiKeyError(SourceError):
    pass


@dataclass(frozen=True)
class SearchPage:
    video_ids: tuple[str, ...]
    next_page_token: Optional[str] = None

    def __post_init__(self):
        if len(set(self.video_ids)) != len(self.video_ids):
            raise ValidationError("video_ids", "page must not repeat ids")
        if not self.video_ids and self.next_page_token is not None:
            raise ValidationError("video_ids", "empty page must not continue")


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "fixture"
    api_key_env: str = DEFAULT_API_KEY_ENV
    education_category_id: str = "27"
    language: str = "en"
    page_size: int = 25
    max_pages_per_query: int = 3
    qps_limit: float = 4.0
    fixture_dir: Optional[str] = None
    api_base_url: str = "https://www.googleapis.com/youtube/v3"

    def __post_init__(self):
        if self.kind not in ("remote", "fixture"):
            raise ValidationError("kind", f"must be 'remote' or 'fixture', got {self.kind!r}")
        if not 1 <= self.page_size <= 50:
            raise ValidationError("page_size", "must be within [1, 50]")
        if self.max_pages_per_query < 1:
            raise ValidationError("max_pages_per_query", "must be >= 1")
        if self.qps_limit <= 0:
            raise ValidationError("qps_limit", "must be positive")


class RateLimiter:
    """Paces calls to one per 1/qps seconds, so any 1-second window sees at
    most ceil(qps)+1 calls. Thread-safe; clock and sleep are injectable for
    tests."""

    def __init__(self, qps: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if qps <= 0:
            raise ValueError("qps must be positive")
        self._interval = 1.0 / qps
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                if now >= self._next_free:
                    self._next_free = now + self._interval
                    return
                wait = self._next_free - now
            self._sleep(wait)


class FixtureSource:
    """Replays recorded search pages and detail snapshots from JSON files.

    Each file holds one query's pages plus the detail records its pages can
    resolve: {"query": text, "pages": [{"ids": [...], "next": token|null}],
    "videos": {id: record fields}}.
    """

    def __init__(self, config: SourceConfig):
        if config.kind != "fixture":
            raise SourceError("FixtureSource requires kind='fixture'")
        if not config.fixture_dir:
            raise SourceError("fixture source requires fixture_dir")
        self.config = config
        self._pages_by_query: dict[str, list[dict]] = {}
        self._videos: dict[str, VideoRecord] = {}
        self._load(Path(config.fixture_dir))

    def _load(self, root: Path) -> None:
        files = sorted(root.glob("*.json"))
        if not files:
            raise SourceError(f"no fixture files under {root}")
        for path in files:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
            query_text = payload["query"]
            if query_text in self._pages_by_query:
                raise SourceError(f"{path}: duplicate fixture for query {query_text!r}")
            self._pages_by_query[query_text] = payload["pages"]
            for video_id, fields_ in payload.get("videos", {}).items():
                if video_id not in self._videos:
                    self._videos[video_id] = VideoRecord.from_json(
                        {"video_id": video_id, **fields_}
                    )

    def search(self, query: SearchQuery, page_token: Optional[str] = None) -> SearchPage:
        pages = self._pages_by_query.get(query.text)
        if pages is None:
            raise UnknownFixtureKeyError(f"no recorded pages for query {query.text!r}")
        index = 0
        if page_token is not None:
            index = next(
                (i + 1 for i, page in enumerate(pages) if page.get("next") == page_token),
                None,
            )
            if index is None or index >= len(pages):
                raise UnknownFixtureKeyError(
                    f"no recorded page for token {page_token!r} of query {query.text!r}"
                )
        page = pages[index]
        return SearchPage(video_ids=tuple(page["ids"]), next_page_token=page.get("next"))

    def fetch_details(self, video_ids: Sequence[str]):
        if not video_ids:
            raise SourceError("fetch_details requires at least one id")
        records = []
        misses = []
        for video_id in video_ids:
            record = self._videos.get(video_id)
            if record is None:
                misses.append(video_id)
            else:
                records.append(record)
        return records, misses


_DURATION_RE = re.compile(
    r"^P(?:(?P<d>\d+)D)?T?(?:(?P<h>\d+)H)?(?:(?P<m>\d+)M)?(?:(?P<s>\d+)S)?$"
)


def parse_iso_duration(text: str) -> int:
    match = _DURATION_RE.match(text or "")
    if not match:
        return 0
    days = int(match.group("d") or 0)
    hours = int(match.group("h") or 0)
    minutes = int(match.group("m") or 0)
    seconds = int(match.group("s") or 0)
    return ((days * 24 + hours) * 60 + minutes) * 60 + seconds


class RemoteSource:
    """Search-API client with key auth, retry with backoff, and QPS pacing."""

    def __init__(self, config: SourceConfig, session: Optional[requests.Session] = None,
                 limiter: Optional[RateLimiter] = None):
        if config.kind != "remote":
            raise SourceError("RemoteSource requires kind='remote'")
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise MissingApiKeyError(
                f"environment variable {config.api_key_env} is not set"
            )
        self.config = config
        self._api_key = api_key
        self._session = session or requests.Session()
        self._limiter = limiter or RateLimiter(config.qps_limit)

    def _get(self, path: str, params: dict, context: str) -> dict:
        url = f"{self.config.api_base_url}/{path}"
        last_error: Optional[Exception] = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                backoff = (RETRY_BASE_MS / 1000.0) * (2 ** (attempt - 1))
                time.sleep(backoff + random.uniform(0, backoff / 4))
            self._limiter.acquire()
            try:
                response = self._session.get(
                    url, params={**params, "key": self._api_key}, timeout=30
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in (403, 429):
                raise QuotaExceededError(context)
            if response.status_code >= 500:
                last_error = TransportError(
                    f"{context}: server returned {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise SourceError(f"{context}: unexpected status {response.status_code}")
            return response.json()
        raise TransportError(f"{context}: giving up after {RETRY_ATTEMPTS} attempts") from last_error

    def search(self, query: SearchQuery, page_token: Optional[str] = None) -> SearchPage:
        params = {
            "part": "id",
            "q": query.text,
            "type": "video",
            "relevanceLanguage": self.config.language,
            "videoCategoryId": self.config.education_category_id,
            "maxResults": self.config.page_size,
        }
        if page_token is not None:
            params["pageToken"] = page_token
        payload = self._get("search", params, f"search {query.text!r}")
        ids = []
        for item in payload.get("items", []):
            video_id = (item.get("id") or {}).get("videoId")
            if video_id and video_id not in ids:
                ids.append(video_id)
        return SearchPage(video_ids=tuple(ids), next_page_token=payload.get("nextPageToken"))

    def fetch_details(self, video_ids: Sequence[str]):
        if not video_ids:
            raise SourceError("fetch_details requires at least one id")
        records = []
        found = set()
        for start in range(0, len(video_ids), DETAIL_BATCH_LIMIT):
            batch = list(video_ids[start:start + DETAIL_BATCH_LIMIT])
            payload = self._get("videos", {
                "part": "snippet,contentDetails,statistics",
                "id": ",".join(batch),
                "maxResults": DETAIL_BATCH_LIMIT,
            }, f"details for {len(batch)} ids")
            fetched_at = utcnow()
            for item in payload.get("items", []):
                record = self._parse_item(item, fetched_at)
                if record is not None:
                    records.append(record)
                    found.add(record.video_id)
        misses = [vid for vid in video_ids if vid not in found]
        return records, misses

    def _parse_item(self, item: dict, fetched_at) -> Optional[VideoRecord]:
        snippet = item.get("snippet") or {}
        statistics = item.get("statistics") or {}
        content = item.get("contentDetails") or {}
        try:
            return VideoRecord(
                video_id=item["id"],
                title=snippet.get("title", ""),
                description=snippet.get("description", ""),
                published_at=parse_utc(snippet["publishedAt"]),
                duration_s=parse_iso_duration(content.get("duration", "")),
                view_count=int(statistics.get("viewCount", 0)),
                like_count=int(statistics.get("likeCount", 0)),
                dislike_count=int(statistics.get("dislikeCount", 0)),
                comment_count=int(statistics.get("commentCount", 0)),
                category_id=snippet.get("categoryId", ""),
                language=snippet.get("defaultAudioLanguage", self.config.language),
                fetched_at=fetched_at,
            )
        except (KeyError, ValueError, ValidationError) as exc:
            log.warning("dropping malformed detail item %r: %s", item.get("id"), exc)
            return None


def make_source(config: SourceConfig, session: Optional[requests.Session] = None):
    if config.kind == "fixture":
        return FixtureSource(config)
    return RemoteSource(config, session=session)
