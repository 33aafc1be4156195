from __future__ import annotations

import pytest

from vidsift.core import TitleSkillPair, ValidationError
from vidsift.querygen import FORM_ORDER, QueryForm, SearchQuery, generate_queries


def test_three_forms_in_order(tm_pair):
    queries = generate_queries(tm_pair)
    assert [q.form for q in queries] == list(FORM_ORDER)
    assert [q.text for q in queries] == [
        "Time Management",
        "Time Management Executive Assistant",
        '"Time Management" Executive Assistant',
    ]
    assert all(q.pair_id == tm_pair.pair_id for q in queries)


def test_form_order_is_the_three_known_forms():
    assert FORM_ORDER == (
        QueryForm.SKILL_ONLY,
        QueryForm.SKILL_TITLE,
        QueryForm.QUOTED_SKILL_TITLE,
    )


def test_same_pair_twice_identical(tm_pair):
    assert generate_queries(tm_pair) == generate_queries(tm_pair)


def test_interior_quotes_stripped_only_in_quoted_form():
    pair = TitleSkillPair(job_title="Analyst", skill='Say "No" Politely')
    queries = generate_queries(pair)
    assert queries[0].text == 'Say "No" Politely'
    assert queries[1].text == 'Say "No" Politely Analyst'
    quoted = queries[2].text
    assert quoted == '"Say No Politely" Analyst'
    # Exactly one balanced pair of quotes survives in the quoted form.
    assert quoted.count('"') == 2


def test_empty_skill_rejected():
    with pytest.raises(ValidationError):
        TitleSkillPair(job_title="Analyst", skill="  ")


def test_search_query_rejects_empty_text():
    with pytest.raises(ValidationError):
        SearchQuery(pair_id="p", form=QueryForm.SKILL_ONLY, text="")
