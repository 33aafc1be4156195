#!/usr/bin/env python3
"""Regenerate fixtures/corpus: a 21-pair offline search corpus with labels.

The corpus is deterministic (fixed seed) and committed to the repo; rerun
this script only when the corpus design changes. Layout produced:

    fixtures/corpus/pairs.csv        the title/skill pairs
    fixtures/corpus/sources/*.json   one recorded-search file per query
    fixtures/corpus/labels.jsonl     curated labels for every retained unit

Design points exercised downstream: a pair with only four unique videos
(exhausted=true), a page id whose details never resolve, one video shared by
two pairs, multi-page forms, cross-form duplicates, and a pair of
conflicting label events for one unit (the later negative wins).
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from vidsift.core import LabelRecord, TitleSkillPair, parse_utc  # noqa: E402
from vidsift.harvest import harvest_all  # noqa: E402
from vidsift.querygen import QueryForm, generate_queries  # noqa: E402
from vidsift.source import FixtureSource, SourceConfig  # noqa: E402
from vidsift import store  # noqa: E402

SEED = 20240816
FETCHED = "2020-03-01T00:00:00Z"
LABELED_BASE = "2020-03-02T00:00:00Z"

PAIRS = [
    ("Recruiter", "Interview Scheduling"),
    ("Administrative Specialist", "Spreadsheets"),
    ("Executive Assistant", "Calendar Management"),
    ("Data Analyst", "Data Visualization"),
    ("Project Coordinator", "Status Reporting"),   # thin pair: 4 unique videos
    ("Customer Service Representative", "Conflict Resolution"),
    ("Sales Associate", "Cold Calling"),
    ("Software Engineer", "Code Review"),
    ("Marketing Manager", "Email Campaigns"),
    ("Financial Analyst", "Forecasting"),
    ("HR Generalist", "Onboarding"),
    ("Office Manager", "Inventory Management"),
    ("Technical Writer", "API Documentation"),
    ("Product Manager", "Roadmapping"),
    ("QA Tester", "Regression Testing"),
    ("Graphic Designer", "Typography"),
    ("Operations Manager", "Process Improvement"),
    ("Business Analyst", "Requirements Gathering"),
    ("Account Executive", "Contract Negotiation"),
    ("Support Engineer", "Ticket Triage"),
    ("Warehouse Supervisor", "Shift Scheduling"),
]

THIN_PAIR_SKILL = "Status Reporting"
GHOST_PAIR_SKILL = "Data Visualization"   # gets a page id with no detail record
SHARED_VIDEO_ID = "shared-excel-basics"
SHARED_PAIR_SKILLS = ("Spreadsheets", "Forecasting")

ON_TOPIC_TEMPLATES = [
    "{skill} Tutorial for Beginners",
    "How to Master {skill}",
    "{skill} Explained in 10 Minutes",
    "{skill} Tips for {title}s",
    "A Practical Guide to {skill}",
    "{skill} Crash Course",
    "Learn {skill} Step by Step",
]
ON_TOPIC_DESCRIPTIONS = [
    "In this video we walk through {skill} with real examples for a {title}.",
    "Everything you need to know about {skill}. Great for anyone working as a {title}.",
    "A hands-on lesson covering {skill} fundamentals and common mistakes.",
    "Training session on {skill}: tools, workflow, and practice exercises.",
]
OFF_TOPIC_TITLES = [
    "Top 10 Pasta Recipes You Must Try",
    "Epic Mountain Biking Fails",
    "My Morning Vlog: Coffee and Chaos",
    "Relaxing Piano Music for Studying",
    "Unboxing the Latest Smartphone",
    "Street Food Tour Highlights",
    "Daily Workout Challenge Day 12",
    "Travel Diary: A Weekend Away",
    "Guitar Cover of a Classic Song",
    "House Plant Care Mistakes",
]
OFF_TOPIC_DESCRIPTIONS = [
    "Thanks for watching! Like and subscribe for more.",
    "Follow along as we explore something completely different today.",
    "New uploads every week. Comment your favorite part below.",
    "Behind the scenes footage and extras at the end.",
]


def slugify(skill: str) -> str:
    return "".join(ch for ch in skill.lower().replace(" ", "-") if ch.isalnum() or ch == "-")


def make_video(rng: random.Random, pair, on_topic: bool) -> dict:
    title_t = rng.choice(ON_TOPIC_TEMPLATES) if on_topic else rng.choice(OFF_TOPIC_TITLES)
    desc_t = rng.choice(ON_TOPIC_DESCRIPTIONS) if on_topic else rng.choice(OFF_TOPIC_DESCRIPTIONS)
    title = title_t.format(skill=pair.skill, title=pair.job_title)
    description = desc_t.format(skill=pair.skill, title=pair.job_title)
    views = int(10 ** rng.uniform(1.5, 6.0))
    return {
        "title": title,
        "description": description,
        "published_at": f"{rng.randint(2015, 2019)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}T00:00:00Z",
        "duration_s": rng.randint(60, 3600),
        "view_count": views,
        "like_count": int(views * rng.uniform(0.001, 0.05)),
        "dislike_count": int(views * rng.uniform(0.0, 0.004)),
        "comment_count": int(views * rng.uniform(0.0, 0.01)),
        "category_id": "27",
        "language": "en",
        "fetched_at": FETCHED,
    }


def table3_overrides(pair, videos: dict, id_prefix: str) -> None:
    """Plant the two published sample rows with their exact stats and labels."""
    if pair.skill == "Interview Scheduling":
        videos[f"{id_prefix}-v01"] = {
            "title": "Scheduling an Interview",
            "description": "Step-by-step tutorial on how to schedule an interview with a candidate.",
            "published_at": "2019-10-01T00:00:00Z",
            "duration_s": 240,
            "view_count": 126,
            "like_count": 1,
            "dislike_count": 0,
            "comment_count": 0,
            "category_id": "27",
            "language": "en",
            "fetched_at": FETCHED,
        }
    if pair.skill == "Spreadsheets":
        videos[f"{id_prefix}-v01"] = {
            "title": "5 Excel Questions Asked in Job Interviews",
            "description": "Top 5 Excel Interview Questions. These MS Excel interview questions and answers help you prepare.",
            "published_at": "2016-05-10T00:00:00Z",
            "duration_s": 780,
            "view_count": 1100000,
            "like_count": 18000,
            "dislike_count": 900,
            "comment_count": 2400,
            "category_id": "27",
            "language": "en",
            "fetched_at": FETCHED,
        }


def build_pair_fixture(rng: random.Random, pair: TitleSkillPair):
    """Returns (files, on_topic_by_id) where files maps filename -> payload."""
    prefix = slugify(pair.skill)[:12]
    thin = pair.skill == THIN_PAIR_SKILL
    n_unique = 4 if thin else rng.randint(10, 13)

    ids = [f"{prefix}-v{i + 1:02d}" for i in range(n_unique)]
    on_topic = {}
    videos = {}
    for i, video_id in enumerate(ids):
        # First two ids lean on-topic so every pair has positive supply.
        topical = i < 2 or rng.random() < 0.38
        on_topic[video_id] = topical
        videos[video_id] = make_video(rng, pair, topical)
    table3_overrides(pair, videos, prefix)
    if pair.skill == "Interview Scheduling":
        on_topic[f"{prefix}-v01"] = True
    if pair.skill == "Spreadsheets":
        on_topic[f"{prefix}-v01"] = False

    if pair.skill in SHARED_PAIR_SKILLS:
        videos[SHARED_VIDEO_ID] = {
            "title": "Excel Basics in 20 Minutes",
            "description": "Spreadsheet fundamentals: cells, formulas, and charts.",
            "published_at": "2018-02-01T00:00:00Z",
            "duration_s": 1200,
            "view_count": 240000,
            "like_count": 5200,
            "dislike_count": 140,
            "comment_count": 800,
            "category_id": "27",
            "language": "en",
            "fetched_at": FETCHED,
        }
        on_topic[SHARED_VIDEO_ID] = pair.skill == "Spreadsheets"
        ids.insert(rng.randrange(2, min(6, len(ids))), SHARED_VIDEO_ID)

    ghost_id = None
    if pair.skill == GHOST_PAIR_SKILL:
        ghost_id = f"{prefix}-ghost"

    if thin:
        form_pools = [ids[:3], [ids[1], ids[3]], [ids[2], ids[0]]]
    else:
        k = len(ids)
        form1 = ids[: k // 2 + 2]
        form2 = ids[k // 3: k // 3 + k // 2 + 1]
        form3 = [ids[0]] + ids[-(k - len(form1) + 1):]
        form_pools = [form1, form2, form3]
        if ghost_id is not None:
            form_pools[0] = form_pools[0][:2] + [ghost_id] + form_pools[0][2:]

    queries = generate_queries(pair)
    files = {}
    for query, pool in zip(queries, form_pools):
        pages = []
        if not thin and len(pool) > 4 and rng.random() < 0.7:
            split_at = rng.randint(3, len(pool) - 1)
            token = f"{prefix}-{query.form.value}-p2"
            pages.append({"ids": pool[:split_at], "next": token})
            pages.append({"ids": pool[split_at:], "next": None})
        else:
            pages.append({"ids": pool, "next": None})
        page_ids = {i for page in pages for i in page["ids"]}
        files[f"{prefix}-{query.form.value}.json"] = {
            "query": query.text,
            "pages": pages,
            "videos": {i: videos[i] for i in sorted(page_ids) if i in videos},
        }
    return files, on_topic


def main() -> None:
    rng = random.Random(SEED)
    out_root = REPO / "fixtures" / "corpus"
    sources_dir = out_root / "sources"
    sources_dir.mkdir(parents=True, exist_ok=True)
    for stale in sources_dir.glob("*.json"):
        stale.unlink()

    pairs = [TitleSkillPair(job_title=t, skill=s) for t, s in PAIRS]
    on_topic_all: dict[tuple[str, str], bool] = {}
    for pair in pairs:
        files, on_topic = build_pair_fixture(rng, pair)
        for name, payload in files.items():
            with open(sources_dir / name, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        for video_id, flag in on_topic.items():
            on_topic_all[(pair.pair_id, video_id)] = flag

    store.write_pairs_csv(out_root / "pairs.csv", pairs)

    # Labels cover exactly what harvesting retains, so run the real loop.
    source = FixtureSource(SourceConfig(kind="fixture", fixture_dir=str(sources_dir)))
    results, failures = harvest_all(pairs, source, concurrency=1)
    assert not failures, failures

    base = parse_utc(LABELED_BASE)
    records = []
    minute = 0

    def add(pair_id, video_id, label):
        nonlocal minute
        records.append(LabelRecord(
            pair_id=pair_id, video_id=video_id, label=label,
            curator_id="curator-a" if minute % 3 else "curator-b",
            labeled_at=base.fromtimestamp(base.timestamp() + 60 * minute, tz=base.tzinfo),
        ))
        minute += 1

    flipped = relabeled = 0
    for result in results:
        for candidate in result.candidates:
            key = (result.pair_id, candidate.video_id)
            label = "+" if on_topic_all[key] else "-"
            if rng.random() < 0.05:
                label = "+" if label == "-" else "-"
                flipped += 1
            # One unit gets a conflicting earlier judgment; the later one wins.
            if relabeled == 0 and label == "-" and minute > 10:
                add(result.pair_id, candidate.video_id, "+")
                relabeled += 1
            add(result.pair_id, candidate.video_id, label)

    labels_path = out_root / "labels.jsonl"
    if labels_path.exists():
        labels_path.unlink()
    store.append_labels(records, labels_path)

    n_units = sum(len(r.candidates) for r in results)
    effective = store.effective_labels(labels_path)
    positives = sum(1 for rec in effective.values() if rec.label == "+")
    print(f"pairs: {len(pairs)}")
    print(f"retained units: {n_units} (thin pair exhausted: "
          f"{[r.exhausted for r in results if len(r.candidates) == 4]})")
    print(f"label events: {len(records)} over {len(effective)} units; "
          f"positive fraction {positives / len(effective):.3f}; flips {flipped}")


if __name__ == "__main__":
    main()
