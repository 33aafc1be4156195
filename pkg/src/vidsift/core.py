"""Shared domain types: title-skill pairs, video metadata, labels, candidates."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

_WS_RUN = re.compile(r"\s+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

RELEVANT = "+"
IRRELEVANT = "-"
LABEL_VALUES = (RELEVANT, IRRELEVANT)


class ValidationError(ValueError):
    """Raised when a domain value violates its invariants; names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes. Stable across runs and platforms."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def normalize_term(text: str) -> str:
    """Lowercase and collapse whitespace runs to single spaces."""
    return _WS_RUN.sub(" ", text.strip()).lower()


def make_pair_id(job_title: str, skill: str) -> str:
    """Deterministic identifier for a (job_title, skill) pair.

    Case-normalized and whitespace-collapsed before hashing, so cosmetic
    variants of the same pair map to the same id.
    """
    title = normalize_term(job_title)
    skill_norm = normalize_term(skill)
    if not title:
        raise ValidationError("job_title", "must be non-empty after trimming")
    if not skill_norm:
        raise ValidationError("skill", "must be non-empty after trimming")
    digest = fnv1a64(f"{title}\u0000{skill_norm}".encode("utf-8"))
    return f"{digest:016x}"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; 'Z' suffix and naive values are treated as UTC."""
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_utc(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class TitleSkillPair:
    """One normalized job title paired with one skill term; the unit of retrieval."""

    job_title: str
    skill: str
    pair_id: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "pair_id", make_pair_id(self.job_title, self.skill))


@dataclass(frozen=True)
class VideoRecord:
    """One video's metadata plus a statistics snapshot taken at fetched_at."""

    video_id: str
    title: str
    description: str
    published_at: datetime
    duration_s: int
    view_count: int
    like_count: int
    dislike_count: int
    comment_count: int
    category_id: str
    language: str
    fetched_at: datetime

    def __post_init__(self):
        if not self.video_id:
            raise ValidationError("video_id", "must be non-empty")
        for name in ("duration_s", "view_count", "like_count", "dislike_count", "comment_count"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValidationError(name, f"must be a non-negative integer, got {value!r}")
        if self.fetched_at < self.published_at:
            raise ValidationError("fetched_at", "must not precede published_at")

    def to_json(self) -> dict:
        return {
            "video_id": self.video_id,
            "title": self.title,
            "description": self.description,
            "published_at": format_utc(self.published_at),
            "duration_s": self.duration_s,
            "view_count": self.view_count,
            "like_count": self.like_count,
            "dislike_count": self.dislike_count,
            "comment_count": self.comment_count,
            "category_id": self.category_id,
            "language": self.language,
            "fetched_at": format_utc(self.fetched_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VideoRecord":
        return cls(
            video_id=obj["video_id"],
            title=obj["title"],
            description=obj["description"],
            published_at=parse_utc(obj["published_at"]),
            duration_s=obj["duration_s"],
            view_count=obj["view_count"],
            like_count=obj["like_count"],
            dislike_count=obj["dislike_count"],
            comment_count=obj["comment_count"],
            category_id=obj["category_id"],
            language=obj["language"],
            fetched_at=parse_utc(obj["fetched_at"]),
        )


@dataclass(frozen=True)
class LabelRecord:
    """A binary relevance judgment for one (pair, video) unit.

    The same video may carry different labels under different pairs, so the
    labeled unit is always the (pair_id, video_id) combination.
    """

    pair_id: str
    video_id: str
    label: str
    curator_id: str
    labeled_at: datetime

    def __post_init__(self):
        if self.label not in LABEL_VALUES:
            raise ValidationError("label", f"must be one of {LABEL_VALUES}, got {self.label!r}")

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "video_id": self.video_id,
            "label": self.label,
            "curator_id": self.curator_id,
            "labeled_at": format_utc(self.labeled_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LabelRecord":
        return cls(
            pair_id=obj["pair_id"],
            video_id=obj["video_id"],
            label=obj["label"],
            curator_id=obj["curator_id"],
            labeled_at=parse_utc(obj["labeled_at"]),
        )


@dataclass(frozen=True)
class Candidate:
    """A retrieved video for a pair, with its first-appearance rank during harvest."""

    pair_id: str
    video_id: str
    retrieval_rank: int
    query_forms: frozenset[str]

    def __post_init__(self):
        if self.retrieval_rank < 0:
            raise ValidationError("retrieval_rank", "must be non-negative")
        if not self.query_forms:
            raise ValidationError("query_forms", "must name at least one query form")

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "video_id": self.video_id,
            "retrieval_rank": self.retrieval_rank,
            "query_forms": sorted(self.query_forms),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Candidate":
        return cls(
            pair_id=obj["pair_id"],
            video_id=obj["video_id"],
            retrieval_rank=obj["retrieval_rank"],
            query_forms=frozenset(obj["query_forms"]),
        )
