from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidsift.core import (
    Candidate,
    LabelRecord,
    TitleSkillPair,
    ValidationError,
    VideoRecord,
    fnv1a64,
    format_utc,
    make_pair_id,
    normalize_term,
    parse_utc,
)

from conftest import make_video, utc


# Published FNV-1a 64-bit reference vectors.
def test_fnv1a64_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_normalize_term_collapses_case_and_whitespace():
    assert normalize_term("  Time   Management ") == "time management"
    assert normalize_term("ONE\ttwo\nthree") == "one two three"


def test_pair_id_deterministic():
    a = make_pair_id("Executive Assistant", "Time Management")
    b = make_pair_id("Executive Assistant", "Time Management")
    assert a == b
    assert len(a) == 16
    assert int(a, 16) >= 0


def test_pair_id_normalization_equivalence():
    base = make_pair_id("Executive Assistant", "Time Management")
    assert make_pair_id("executive  assistant", "Time Management") == base
    assert make_pair_id("EXECUTIVE ASSISTANT", "time management") == base


def test_pair_id_separator_prevents_field_bleed():
    # The title/skill boundary must matter: moving a word across it changes the id.
    assert make_pair_id("a b", "c") != make_pair_id("a", "b c")


def test_pair_id_empty_title_rejected():
    with pytest.raises(ValidationError) as err:
        make_pair_id("", "Time Management")
    assert err.value.field_name == "job_title"
    with pytest.raises(ValidationError):
        make_pair_id("   ", "Time Management")
    with pytest.raises(ValidationError):
        make_pair_id("Recruiter", "")


@given(st.text(min_size=1), st.text(min_size=1))
def test_pair_id_normalization_idempotent_property(title, skill):
    if not normalize_term(title) or not normalize_term(skill):
        return
    # Feeding the normalized form back in lands on the same id.
    assert make_pair_id(title, skill) == make_pair_id(
        normalize_term(title), normalize_term(skill)
    )


def test_title_skill_pair_carries_derived_id():
    pair = TitleSkillPair(job_title="Recruiter", skill="Interview Scheduling")
    assert pair.pair_id == make_pair_id("Recruiter", "Interview Scheduling")


def test_video_record_round_trip():
    video = make_video("v1", views=126, likes=1)
    again = VideoRecord.from_json(json.loads(json.dumps(video.to_json())))
    assert again == video


def test_video_record_rejects_negative_counts():
    with pytest.raises(ValidationError):
        make_video(views=-1)
    with pytest.raises(ValidationError):
        make_video(dislikes=-3)


def test_video_record_rejects_fetch_before_publish():
    with pytest.raises(ValidationError) as err:
        make_video(published=utc(2020, 1, 1), fetched=utc(2019, 1, 1))
    assert err.value.field_name == "fetched_at"


def test_video_record_rejects_empty_id():
    with pytest.raises(ValidationError):
        make_video(video_id="")


def test_label_record_validates_label():
    record = LabelRecord(pair_id="p", video_id="v", label="+",
                         curator_id="c", labeled_at=utc(2020, 1, 1))
    assert LabelRecord.from_json(record.to_json()) == record
    with pytest.raises(ValidationError):
        LabelRecord(pair_id="p", video_id="v", label="yes",
                    curator_id="c", labeled_at=utc(2020, 1, 1))


def test_candidate_validation_and_round_trip():
    candidate = Candidate(pair_id="p", video_id="v", retrieval_rank=0,
                          query_forms=frozenset({"skill_only", "skill_title"}))
    assert candidate.to_json()["query_forms"] == ["skill_only", "skill_title"]
    assert Candidate.from_json(candidate.to_json()) == candidate
    with pytest.raises(ValidationError):
        Candidate(pair_id="p", video_id="v", retrieval_rank=-1,
                  query_forms=frozenset({"skill_only"}))
    with pytest.raises(ValidationError):
        Candidate(pair_id="p", video_id="v", retrieval_rank=0, query_forms=frozenset())


def test_utc_parse_and_format_round_trip():
    stamp = "2019-06-01T12:30:00Z"
    assert format_utc(parse_utc(stamp)) == stamp
    assert parse_utc("2019-06-01T12:30:00+00:00") == parse_utc(stamp)
