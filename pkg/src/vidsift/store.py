"""File-backed persistence: JSONL datasets, the append-only label log, and
the label/feature join that produces training rows."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable, Iterable, Optional

from .core import Candidate, LabelRecord, TitleSkillPair, VideoRecord, format_utc, parse_utc, utcnow
from .featurize import FeatureRow

MANIFEST_NAME = "manifest.json"


class StoreError(ValueError):
    pass


class MalformedLineError(StoreError):
    """A JSONL line failed to parse or validate; carries its 1-based line number."""

    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no


def write_jsonl(path, objects: Iterable[dict]) -> int:
    """Write one JSON object per line; atomic via temp-file rename. Returns count."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    count = 0
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for obj in objects:
                fh.write(json.dumps(obj, separators=(",", ":")))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return count


def read_jsonl(path, parse: Callable[[dict], object], strict: bool = True):
    """Read records line by line. Returns (records, skipped_count).

    strict: any malformed line aborts with its line number.
    lenient: malformed lines are skipped and counted.
    """
    records = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                records.append(parse(obj))
            except Exception as exc:
                if strict:
                    raise MalformedLineError(path, line_no, str(exc)) from exc
                skipped += 1
    return records, skipped


def write_videos(path, videos: Iterable[VideoRecord]) -> int:
    return write_jsonl(path, (v.to_json() for v in videos))


def read_videos(path, strict: bool = True):
    return read_jsonl(path, VideoRecord.from_json, strict=strict)


def write_candidates(path, candidates: Iterable[Candidate]) -> int:
    return write_jsonl(path, (c.to_json() for c in candidates))


def read_candidates(path, strict: bool = True):
    return read_jsonl(path, Candidate.from_json, strict=strict)


def write_features(path, rows: Iterable[FeatureRow]) -> int:
    return write_jsonl(path, (r.to_json() for r in rows))


def read_features(path, strict: bool = True):
    return read_jsonl(path, FeatureRow.from_json, strict=strict)


def read_labels(path, strict: bool = True):
    return read_jsonl(path, LabelRecord.from_json, strict=strict)


def write_pairs_csv(path, pairs: Iterable[TitleSkillPair]) -> int:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["job_title", "skill"])
        for pair in pairs:
            writer.writerow([pair.job_title, pair.skill])
            count += 1
    return count


def read_pairs_csv(path) -> list[TitleSkillPair]:
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["job_title", "skill"]:
            raise StoreError(f"{path}: expected header 'job_title,skill', got {reader.fieldnames}")
        for row_no, row in enumerate(reader, start=2):
            try:
                pairs.append(TitleSkillPair(job_title=row["job_title"], skill=row["skill"]))
            except Exception as exc:
                raise MalformedLineError(path, row_no, str(exc)) from exc
    return pairs


def append_labels(records: list[LabelRecord], path) -> int:
    """Append a batch of labels to the log in one write; empty batch is a no-op.

    The whole batch is serialized first and written with a single append, so
    concurrent batches interleave at batch granularity, never mid-record.
    """
    if not records:
        return 0
    for record in records:
        if not isinstance(record, LabelRecord):
            raise StoreError(f"append_labels expects LabelRecord, got {type(record).__name__}")
    payload = "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in records)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    return len(records)


def effective_labels(path, strict: bool = True) -> dict[tuple[str, str], LabelRecord]:
    """Fold the label log into one record per (pair_id, video_id).

    Last write wins by labeled_at; equal timestamps resolve to the later log
    position, so replaying the log is order-independent given timestamps.
    """
    records, _ = read_labels(path, strict=strict)
    effective: dict[tuple[str, str], tuple[datetime, int]] = {}
    chosen: dict[tuple[str, str], LabelRecord] = {}
    for position, record in enumerate(records):
        key = (record.pair_id, record.video_id)
        stamp = (record.labeled_at, position)
        if key not in effective or stamp >= effective[key]:
            effective[key] = stamp
            chosen[key] = record
    return chosen


def export_training_set(labels_path, features_path):
    """Inner-join effective labels onto feature rows.

    Returns (labeled_rows, report) where report counts what fell out of the
    join: {"unlabeled": feature rows with no label, "orphan_labels": labels
    with no feature row}.
    """
    rows, _ = read_features(features_path, strict=True)
    schemas = {row.schema_id for row in rows}
    if len(schemas) > 1:
        raise StoreError(f"features file mixes schemas: {sorted(schemas)}")
    labels = effective_labels(labels_path, strict=True)

    joined = []
    matched_keys = set()
    unlabeled = 0
    for row in rows:
        key = (row.pair_id, row.video_id)
        record = labels.get(key)
        if record is None:
            unlabeled += 1
            continue
        matched_keys.add(key)
        joined.append(replace(row, label=record.label))
    orphan_labels = len(labels) - len(matched_keys)
    return joined, {"unlabeled": unlabeled, "orphan_labels": orphan_labels}


@dataclass(frozen=True)
class DatasetManifest:
    created_at: datetime
    counts: dict
    schema_versions: dict
    provider_id: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "created_at": format_utc(self.created_at),
            "counts": dict(self.counts),
            "schema_versions": dict(self.schema_versions),
            "provider_id": self.provider_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        return cls(
            created_at=parse_utc(obj["created_at"]),
            counts=dict(obj["counts"]),
            schema_versions=dict(obj["schema_versions"]),
            provider_id=obj.get("provider_id"),
        )


def write_manifest(directory, counts: dict, schema_versions: dict,
                   provider_id: Optional[str] = None) -> DatasetManifest:
    manifest = DatasetManifest(
        created_at=utcnow(),
        counts=counts,
        schema_versions=schema_versions,
        provider_id=provider_id,
    )
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(directory) -> DatasetManifest:
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "r", encoding="utf-8") as fh:
        return DatasetManifest.from_json(json.load(fh))
