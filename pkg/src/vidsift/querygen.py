"""Build the three search-query forms for a title-skill pair."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import TitleSkillPair, ValidationError


class QueryForm(str, Enum):
    SKILL_ONLY = "skill_only"
    SKILL_TITLE = "skill_title"
    QUOTED_SKILL_TITLE = "quoted_skill_title"


FORM_ORDER = (QueryForm.SKILL_ONLY, QueryForm.SKILL_TITLE, QueryForm.QUOTED_SKILL_TITLE)


@dataclass(frozen=True)
class SearchQuery:
    pair_id: str
    form: QueryForm
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValidationError("text", "query text must be non-empty")


def generate_queries(pair: TitleSkillPair) -> list[SearchQuery]:
    """Return the three query forms, in order: skill; skill + title; "skill" + title.

    Skill and title are inserted verbatim (search engines are case-insensitive,
    and original casing preserves quoted-phrase semantics). Interior double
    quotes are stripped from the skill before it is wrapped in quotes.
    """
    skill = pair.skill
    title = pair.job_title
    quoted_skill = skill.replace('"', "")
    return [
        SearchQuery(pair.pair_id, QueryForm.SKILL_ONLY, skill),
        SearchQuery(pair.pair_id, QueryForm.SKILL_TITLE, f"{skill} {title}"),
        SearchQuery(pair.pair_id, QueryForm.QUOTED_SKILL_TITLE, f'"{quoted_skill}" {title}'),
    ]
