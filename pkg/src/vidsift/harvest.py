"""Per-pair retrieval loop: run the three query forms in order, deduplicate,
and retain up to nine unique detail-resolvable videos per pair."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .core import Candidate, TitleSkillPair, ValidationError, VideoRecord
from .querygen import generate_queries
from .source import SourceError

log = logging.getLogger(__name__)

DEFAULT_CAP = 9


class HarvestError(Exception):
    pass


@dataclass(frozen=True)
class HarvestResult:
    pair_id: str
    candidates: tuple[Candidate, ...]
    exhausted: bool
    # Detail snapshots for the retained candidates, in candidate order; kept
    # here so callers persist videos without a second round of detail calls.
    videos: tuple[VideoRecord, ...] = ()

    def __post_init__(self):
        if len(self.candidates) > DEFAULT_CAP:
            raise ValidationError("candidates", f"must retain at most {DEFAULT_CAP}")
        seen = set()
        for position, candidate in enumerate(self.candidates):
            if candidate.video_id in seen:
                raise ValidationError("candidates", f"duplicate video {candidate.video_id}")
            seen.add(candidate.video_id)
            if candidate.retrieval_rank != position:
                raise ValidationError("candidates", "retrieval_rank must equal list position")


def dedupe(ids):
    """First occurrence of each id kept, order preserved."""
    return list(dict.fromkeys(ids))


def _id_stream(pair: TitleSkillPair, source, forms_by_id: dict[str, set[str]]):
    """Yield never-seen-before ids in retrieval order across forms and pages.

    Every id on a fetched page is credited to that page's query form, whether
    or not the id is new; pages are only fetched while the caller keeps
    pulling, so an early stop fetches nothing extra.
    """
    max_pages = source.config.max_pages_per_query
    seen: set[str] = set()
    for query in generate_queries(pair):
        token = None
        for _ in range(max_pages):
            page = source.search(query, token)
            for video_id in page.video_ids:
                forms_by_id.setdefault(video_id, set()).add(query.form.value)
                if video_id not in seen:
                    seen.add(video_id)
                    yield video_id
            token = page.next_page_token
            if token is None:
                break


def harvest_pair(pair: TitleSkillPair, source, cap: int = DEFAULT_CAP) -> HarvestResult:
    """Retrieve up to cap unique videos for one pair.

    Walks the query forms in order, exhausting pages within a form before
    advancing. The cap counts candidates whose details resolved; ids whose
    detail lookup misses are dropped (logged) and further supply is pulled to
    replace them. exhausted=true means supply ran out below the cap.
    """
    if cap < 1 or cap > DEFAULT_CAP:
        raise HarvestError(f"cap must be within [1, {DEFAULT_CAP}], got {cap}")
    forms_by_id: dict[str, set[str]] = {}
    stream = _id_stream(pair, source, forms_by_id)
    kept_ids: list[str] = []
    kept_videos: list[VideoRecord] = []
    supply_exhausted = False
    try:
        while len(kept_ids) < cap:
            want = cap - len(kept_ids)
            batch = []
            for video_id in stream:
                batch.append(video_id)
                if len(batch) == want:
                    break
            if len(batch) < want:
                supply_exhausted = True
            if not batch:
                break
            records, misses = source.fetch_details(batch)
            for miss in misses:
                log.info("pair %s: dropping %s (details unavailable)", pair.pair_id, miss)
            by_id = {record.video_id: record for record in records}
            for video_id in batch:
                record = by_id.get(video_id)
                if record is not None:
                    kept_ids.append(video_id)
                    kept_videos.append(record)
    except SourceError as exc:
        raise HarvestError(f"pair {pair.pair_id} ({pair.job_title!r}, {pair.skill!r}): {exc}") from exc

    candidates = tuple(
        Candidate(
            pair_id=pair.pair_id,
            video_id=video_id,
            retrieval_rank=rank,
            query_forms=frozenset(forms_by_id[video_id]),
        )
        for rank, video_id in enumerate(kept_ids)
    )
    exhausted = supply_exhausted and len(kept_ids) < cap
    return HarvestResult(pair_id=pair.pair_id, candidates=candidates,
                         exhausted=exhausted, videos=tuple(kept_videos))


def harvest_all(pairs, source, concurrency: int = 4, cap: int = DEFAULT_CAP):
    """Harvest every pair; results keep input order regardless of completion order.

    Returns (results, failures) where failures is a list of (pair_id, error
    message). Raises if more than 10% of pairs fail.
    """
    pairs = list(pairs)
    if concurrency < 1:
        raise HarvestError("concurrency must be >= 1")
    if not pairs:
        return [], []

    def run(pair: TitleSkillPair):
        return harvest_pair(pair, source, cap=cap)

    outcomes: list = [None] * len(pairs)
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = [pool.submit(run, pair) for pair in pairs]
        for index, future in enumerate(futures):
            try:
                outcomes[index] = future.result()
            except HarvestError as exc:
                outcomes[index] = exc

    results = []
    failures = []
    for pair, outcome in zip(pairs, outcomes):
        if isinstance(outcome, HarvestError):
            failures.append((pair.pair_id, str(outcome)))
        else:
            results.append(outcome)
    if failures and len(failures) > 0.10 * len(pairs):
        detail = "; ".join(message for _, message in failures[:3])
        raise HarvestError(
            f"{len(failures)} of {len(pairs)} pairs failed harvesting: {detail}"
        )
    return results, failures
