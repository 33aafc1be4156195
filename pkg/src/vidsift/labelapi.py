"""HTTP service feeding the labeling UI.

Serves unlabeled candidates in harvest order (or a near-threshold review
queue when model probabilities are available), accepts binary labels onto the
append-only log, and reports coverage stats. Items handed to a curator are
leased for ten minutes so two curators never hold the same item at once.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .core import Candidate, LabelRecord, TitleSkillPair, VideoRecord, format_utc, utcnow
from . import store

LEASE_SECONDS = 600.0
DEFAULT_PORT = 8787
WATCH_URL_PREFIX = "https://www.youtube.com/watch?v="

QUEUE_KINDS = ("unlabeled", "review")


@dataclass
class ServiceState:
    pairs: list[TitleSkillPair]
    candidates: list[Candidate]
    videos: dict[str, VideoRecord]
    labels_path: str
    probas: dict[tuple[str, str], float] = field(default_factory=dict)
    static_dir: Optional[str] = None
    clock: Callable[[], float] = time.monotonic

    def __post_init__(self):
        self._lock = threading.Lock()
        self._pair_order = {pair.pair_id: index for index, pair in enumerate(self.pairs)}
        self._pairs_by_id = {pair.pair_id: pair for pair in self.pairs}
        self._candidate_keys = {(c.pair_id, c.video_id) for c in self.candidates}
        self._leases: dict[tuple[str, str], tuple[str, float]] = {}
        if os.path.exists(self.labels_path):
            self._effective = {
                key: record.label
                for key, record in store.effective_labels(self.labels_path).items()
            }
        else:
            self._effective = {}

    @classmethod
    def from_workdir(cls, workdir: str, static_dir: Optional[str] = None,
                     clock: Callable[[], float] = time.monotonic) -> "ServiceState":
        pairs = store.read_pairs_csv(os.path.join(workdir, "pairs.csv"))
        candidates, _ = store.read_candidates(os.path.join(workdir, "candidates.jsonl"))
        videos, _ = store.read_videos(os.path.join(workdir, "videos.jsonl"))
        probas: dict[tuple[str, str], float] = {}
        decisions_path = os.path.join(workdir, "decisions.jsonl")
        if os.path.exists(decisions_path):
            with open(decisions_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    probas[(obj["pair_id"], obj["video_id"])] = float(obj["proba"])
        return cls(
            pairs=pairs,
            candidates=candidates,
            videos={video.video_id: video for video in videos},
            labels_path=os.path.join(workdir, "labels.jsonl"),
            probas=probas,
            static_dir=static_dir,
            clock=clock,
        )

    # --- internal helpers (call with the lock held) ------------------------

    def _lease_active(self, key: tuple[str, str], now: float) -> bool:
        lease = self._leases.get(key)
        return lease is not None and lease[1] > now

    def _queue(self, kind: str, lo: float, hi: float) -> list[Candidate]:
        if kind == "unlabeled":
            eligible = [c for c in self.candidates
                        if (c.pair_id, c.video_id) not in self._effective]
            eligible.sort(key=lambda c: (self._pair_order.get(c.pair_id, len(self._pair_order)),
                                         c.retrieval_rank))
            return eligible
        eligible = []
        for candidate in self.candidates:
            key = (candidate.pair_id, candidate.video_id)
            if key in self._effective:
                continue
            proba = self.probas.get(key)
            if proba is None or not lo <= proba <= hi:
                continue
            eligible.append(candidate)
        eligible.sort(key=lambda c: (
            abs(self.probas[(c.pair_id, c.video_id)] - 0.5),
            self._pair_order.get(c.pair_id, len(self._pair_order)),
            c.retrieval_rank,
        ))
        return eligible

    def _item_payload(self, candidate: Candidate, kind: str) -> dict:
        pair = self._pairs_by_id[candidate.pair_id]
        video = self.videos.get(candidate.video_id)
        key = (candidate.pair_id, candidate.video_id)
        video_payload = None
        if video is not None:
            video_payload = {
                "video_id": video.video_id,
                "title": video.title,
                "description": video.description,
                "watch_url": WATCH_URL_PREFIX + video.video_id,
                "stats": {
                    "view_count": video.view_count,
                    "like_count": video.like_count,
                    "dislike_count": video.dislike_count,
                    "comment_count": video.comment_count,
                    "duration_s": video.duration_s,
                    "published_at": format_utc(video.published_at),
                },
            }
        proba = self.probas.get(key)
        return {
            "queue_kind": kind,
            "pair": {
                "pair_id": pair.pair_id,
                "job_title": pair.job_title,
                "skill": pair.skill,
            },
            "video": video_payload,
            "retrieval_rank": candidate.retrieval_rank,
            "query_forms": sorted(candidate.query_forms),
            "model_proba": proba if kind == "review" or proba is not None else None,
            "lease_seconds": LEASE_SECONDS,
        }

    # --- public operations --------------------------------------------------

    def next_item(self, curator_id: str, kind: str, lo: float = 0.0,
                  hi: float = 1.0) -> Optional[dict]:
        with self._lock:
            now = self.clock()
            for candidate in self._queue(kind, lo, hi):
                key = (candidate.pair_id, candidate.video_id)
                if self._lease_active(key, now):
                    continue
                self._leases[key] = (curator_id, now + LEASE_SECONDS)
                return self._item_payload(candidate, kind)
        return None

    def release(self, pair_id: str, video_id: str, curator_id: str) -> bool:
        with self._lock:
            key = (pair_id, video_id)
            lease = self._leases.get(key)
            if lease is not None and lease[0] == curator_id:
                del self._leases[key]
                return True
        return False

    def submit(self, pair_id: str, video_id: str, label: str, curator_id: str) -> str:
        key = (pair_id, video_id)
        if key not in self._candidate_keys:
            raise KeyError(f"unknown candidate ({pair_id}, {video_id})")
        record = LabelRecord(
            pair_id=pair_id,
            video_id=video_id,
            label=label,
            curator_id=curator_id,
            labeled_at=utcnow(),
        )
        with self._lock:
            store.append_labels([record], self.labels_path)
            effective = store.effective_labels(self.labels_path)[key].label
            self._effective[key] = effective
            self._leases.pop(key, None)
        return effective

    def stats(self) -> dict:
        with self._lock:
            total = len(self.candidates)
            labeled_keys = {
                (c.pair_id, c.video_id) for c in self.candidates
                if (c.pair_id, c.video_id) in self._effective
            }
            labeled = len(labeled_keys)
            positives = sum(
                1 for key in labeled_keys if self._effective[key] == "+"
            )
            per_pair: dict[str, list[int]] = {}
            for candidate in self.candidates:
                entry = per_pair.setdefault(candidate.pair_id, [0, 0])
                entry[1] += 1
                if (candidate.pair_id, candidate.video_id) in labeled_keys:
                    entry[0] += 1
            coverage = (
                sum(done / count for done, count in per_pair.values()) / len(per_pair)
                if per_pair else 0.0
            )
            return {
                "total": total,
                "labeled": labeled,
                "positive_fraction": positives / labeled if labeled else 0.0,
                "per_pair_coverage": coverage,
            }

    def pair_candidates(self, pair_id: str) -> list[dict]:
        if pair_id not in self._pairs_by_id:
            raise KeyError(f"unknown pair {pair_id}")
        with self._lock:
            out = []
            for candidate in self.candidates:
                if candidate.pair_id != pair_id:
                    continue
                payload = self._item_payload(candidate, "unlabeled")
                payload["label"] = self._effective.get((pair_id, candidate.video_id))
                out.append(payload)
            return out


class LabelSubmission(BaseModel):
    pair_id: str
    video_id: str
    label: str
    curator_id: str


class LeaseRelease(BaseModel):
    pair_id: str
    video_id: str
    curator_id: str


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="video labeling service")

    @app.get("/api/queue/next")
    def queue_next(
        curator: str = Query(...),
        kind: str = Query("unlabeled"),
        lo: float = Query(0.0),
        hi: float = Query(1.0),
    ):
        if kind not in QUEUE_KINDS:
            raise HTTPException(status_code=400, detail=f"kind must be one of {QUEUE_KINDS}")
        if not 0.0 <= lo <= hi <= 1.0:
            raise HTTPException(status_code=400, detail="band must satisfy 0 <= lo <= hi <= 1")
        return {"item": state.next_item(curator, kind, lo, hi)}

    @app.post("/api/labels")
    def post_label(submission: LabelSubmission):
        if submission.label not in ("+", "-"):
            raise HTTPException(status_code=400, detail="label must be '+' or '-'")
        try:
            effective = state.submit(
                submission.pair_id, submission.video_id,
                submission.label, submission.curator_id,
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"effective_label": effective}

    @app.post("/api/queue/release")
    def post_release(body: LeaseRelease):
        released = state.release(body.pair_id, body.video_id, body.curator_id)
        return {"released": released}

    @app.get("/api/stats")
    def get_stats():
        return state.stats()

    @app.get("/api/pairs/{pair_id}/candidates")
    def get_pair_candidates(pair_id: str):
        try:
            return {"candidates": state.pair_candidates(pair_id)}
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    if state.static_dir and os.path.isdir(state.static_dir):
        app.mount("/", StaticFiles(directory=state.static_dir, html=True), name="ui")

    return app
