"""Assemble per-(pair, video) feature rows for the two classifier feature sets.

Set 1 is video statistics only. Set 2 prepends those statistics to five
512-d text embeddings (video title, video description, search query, job
title, skill) and the ten pairwise cosine similarities between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import TitleSkillPair, VideoRecord
from .embed import DIM, EmbeddingVector, cosine
from .querygen import QueryForm, generate_queries

SET1 = "set1"
SET2 = "set2"

# Raw counts enter as log1p; the count ratios below use the raw counts with a
# +1 denominator smoothing so they are bounded and defined everywhere.
STAT_NAMES = (
    "log_view_count",
    "log_like_count",
    "log_dislike_count",
    "log_comment_count",
    "like_per_view",
    "dislike_per_view",
    "comment_per_view",
    "dislike_per_like",
    "comment_per_like",
    "comment_per_dislike",
    "duration_s",
    "days_elapsed",
)

_VECTOR_BLOCKS = ("title", "desc", "query", "jobtitle", "skill")

COSINE_NAMES = (
    "cos_title_desc",
    "cos_title_query",
    "cos_title_jobtitle",
    "cos_title_skill",
    "cos_desc_query",
    "cos_desc_jobtitle",
    "cos_desc_skill",
    "cos_query_jobtitle",
    "cos_query_skill",
    "cos_jobtitle_skill",
)

SEMANTIC_DIM = len(_VECTOR_BLOCKS) * DIM + len(COSINE_NAMES)


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    schema_id: str
    names: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.names)


def _build_schemas() -> dict[str, FeatureSchema]:
    set1_names = STAT_NAMES
    vec_names = tuple(
        f"{block}_vec_{i:03d}" for block in _VECTOR_BLOCKS for i in range(DIM)
    )
    set2_names = set1_names + vec_names + COSINE_NAMES
    return {
        SET1: FeatureSchema(SET1, set1_names),
        SET2: FeatureSchema(SET2, set2_names),
    }


SCHEMAS = _build_schemas()


def get_schema(schema_id: str) -> FeatureSchema:
    try:
        return SCHEMAS[schema_id]
    except KeyError:
        raise FeatureError(f"unknown feature schema {schema_id!r}") from None


@dataclass(frozen=True)
class FeatureRow:
    pair_id: str
    video_id: str
    schema_id: str
    values: tuple[float, ...]
    label: str | None = None

    def __post_init__(self):
        schema = get_schema(self.schema_id)
        if len(self.values) != schema.dim:
            raise FeatureError(
                f"{self.schema_id} row must have {schema.dim} values, got {len(self.values)}"
            )
        for v in self.values:
            if math.isnan(v) or math.isinf(v):
                raise FeatureError("feature values must be finite")

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "video_id": self.video_id,
            "schema": self.schema_id,
            "values": list(self.values),
            "label": self.label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureRow":
        return cls(
            pair_id=obj["pair_id"],
            video_id=obj["video_id"],
            schema_id=obj["schema"],
            values=tuple(float(v) for v in obj["values"]),
            label=obj.get("label"),
        )


def days_elapsed(video: VideoRecord) -> int:
    return int((video.fetched_at - video.published_at).total_seconds() // 86400)


def stat_features(video: VideoRecord) -> list[float]:
    """The 12 statistics features, in schema order."""
    view = video.view_count
    like = video.like_count
    dislike = video.dislike_count
    comment = video.comment_count
    return [
        math.log1p(view),
        math.log1p(like),
        math.log1p(dislike),
        math.log1p(comment),
        like / (view + 1),
        dislike / (view + 1),
        comment / (view + 1),
        dislike / (like + 1),
        comment / (like + 1),
        comment / (dislike + 1),
        float(video.duration_s),
        float(days_elapsed(video)),
    ]


def semantic_features(video: VideoRecord, pair: TitleSkillPair, query_text: str,
                      embedder) -> list[float]:
    """Five 512-d embeddings plus their ten pairwise cosines (2570 floats)."""
    vectors: list[EmbeddingVector] = [
        embedder.embed(video.title),
        embedder.embed(video.description),
        embedder.embed(query_text),
        embedder.embed(pair.job_title),
        embedder.embed(pair.skill),
    ]
    out: list[float] = []
    for vec in vectors:
        out.extend(vec.values)
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            out.append(cosine(vectors[i], vectors[j]))
    return out


def pair_query_text(pair: TitleSkillPair) -> str:
    """The skill+title (form 2) query: the only form holding both terms unquoted."""
    for query in generate_queries(pair):
        if query.form is QueryForm.SKILL_TITLE:
            return query.text
    raise AssertionError("generate_queries must produce the skill+title form")


def build_row(pair: TitleSkillPair, video: VideoRecord, schema_id: str,
              embedder=None, label: str | None = None) -> FeatureRow:
    """Assemble one feature row; set2 requires an embedder."""
    if schema_id == SET1:
        values = stat_features(video)
    elif schema_id == SET2:
        if embedder is None:
            raise FeatureError("set2 rows require an embedder")
        values = stat_features(video) + semantic_features(
            video, pair, pair_query_text(pair), embedder
        )
    else:
        raise FeatureError(f"unknown feature schema {schema_id!r}")
    return FeatureRow(
        pair_id=pair.pair_id,
        video_id=video.video_id,
        schema_id=schema_id,
        values=tuple(float(v) for v in values),
        label=label,
    )
