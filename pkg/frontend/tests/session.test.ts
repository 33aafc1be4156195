import { describe, expect, it } from "vitest";

import { HttpError, type LabelApi } from "../src/api.js";
import { UiSession } from "../src/session.js";
import type { LabelDecision, QueueItem, ServiceStats } from "../src/types.js";

function makeItem(videoId: string, proba: number | null = null): QueueItem {
  return {
    queue_kind: proba === null ? "unlabeled" : "review",
    pair: { pair_id: "p1", job_title: "Recruiter", skill: "Interview Scheduling" },
    video: {
      video_id: videoId,
      title: `video ${videoId}`,
      description: "",
      watch_url: `https://www.youtube.com/watch?v=${videoId}`,
      stats: {
        view_count: 1,
        like_count: 0,
        dislike_count: 0,
        comment_count: 0,
        duration_s: 60,
        published_at: "2019-01-01T00:00:00Z",
      },
    },
    retrieval_rank: 0,
    query_forms: ["SKILL"],
    model_proba: proba,
    lease_seconds: 600,
  };
}

/** Scripted service double: serves a fixed queue, records every call. */
class FakeApi implements LabelApi {
  queue: QueueItem[];
  posted: LabelDecision[] = [];
  released: string[] = [];
  statsFetches = 0;
  failNextPosts = 0;
  rejectNextPost = false;

  constructor(items: QueueItem[]) {
    this.queue = [...items];
  }

  async fetchNext(): Promise<QueueItem | null> {
    return this.queue.shift() ?? null;
  }

  async postLabel(decision: LabelDecision) {
    if (this.rejectNextPost) {
      this.rejectNextPost = false;
      throw new HttpError(404, "unknown candidate");
    }
    if (this.failNextPosts > 0) {
      this.failNextPosts -= 1;
      throw new TypeError("fetch failed");
    }
    this.posted.push(decision);
    return decision.label;
  }

  async releaseLease(_pair: string, video_id: string) {
    this.released.push(video_id);
    return true;
  }

  async fetchStats(): Promise<ServiceStats> {
    this.statsFetches += 1;
    return {
      total: 10,
      labeled: this.posted.length,
      positive_fraction: 0,
      per_pair_coverage: 0,
    };
  }
}

describe("UiSession", () => {
  it("posts '+' on submit, advances, and refreshes stats within the same turn", async () => {
    const api = new FakeApi([makeItem("a"), makeItem("b")]);
    const session = new UiSession(api, { curator: "ann", kind: "unlabeled" });
    await session.start();
    expect(session.current?.video?.video_id).toBe("a");

    expect(await session.submit("+")).toBe(true);
    expect(api.posted).toEqual([
      { pair_id: "p1", video_id: "a", label: "+", curator_id: "ann" },
    ]);
    expect(session.labeled).toBe(1);
    expect(session.stats?.labeled).toBe(1);
    expect(session.current?.video?.video_id).toBe("b");
  });

  it("skips by releasing the lease without posting a label", async () => {
    const api = new FakeApi([makeItem("a"), makeItem("b")]);
    const session = new UiSession(api, { curator: "ann", kind: "unlabeled" });
    await session.start();

    expect(await session.skip()).toBe(true);
    expect(api.posted).toEqual([]);
    expect(api.released).toEqual(["a"]);
    expect(session.skipped).toBe(1);
    expect(session.labeled).toBe(0);
    expect(session.current?.video?.video_id).toBe("b");
  });

  it("keeps at most one active item and drops submits while drained", async () => {
    const api = new FakeApi([makeItem("a")]);
    const session = new UiSession(api, { curator: "ann", kind: "unlabeled" });
    await session.start();
    await session.submit("-");
    expect(session.current).toBeNull();
    expect(session.drained).toBe(true);

    expect(await session.submit("+")).toBe(false);
    expect(await session.skip()).toBe(false);
    expect(api.posted).toHaveLength(1);
  });

  it("queues the decision locally when the network is down, then delivers on reconnect", async () => {
    const api = new FakeApi([makeItem("a"), makeItem("b")]);
    const notices: string[] = [];
    const session = new UiSession(api, {
      curator: "ann",
      kind: "unlabeled",
      onNotice: (m) => notices.push(m),
    });
    await session.start();

    api.failNextPosts = 1;
    await session.submit("+");
    expect(api.posted).toEqual([]);
    expect(session.pending.size).toBe(1);
    expect(session.labeled).toBe(1);
    expect(notices.some((m) => m.includes("offline"))).toBe(true);
    // the session moved on; the decision is parked, not lost
    expect(session.current?.video?.video_id).toBe("b");

    await session.reconnect();
    expect(session.pending.size).toBe(0);
    expect(api.posted).toEqual([
      { pair_id: "p1", video_id: "a", label: "+", curator_id: "ann" },
    ]);
    expect(notices.some((m) => m.includes("delivered"))).toBe(true);
  });

  it("notifies on a rejected decision without queueing it", async () => {
    const api = new FakeApi([makeItem("a"), makeItem("b")]);
    const notices: string[] = [];
    const session = new UiSession(api, {
      curator: "ann",
      kind: "unlabeled",
      onNotice: (m) => notices.push(m),
    });
    await session.start();

    api.rejectNextPost = true;
    await session.submit("+");
    expect(session.pending.size).toBe(0);
    expect(session.labeled).toBe(0);
    expect(notices.some((m) => m.includes("rejected"))).toBe(true);
    expect(session.current?.video?.video_id).toBe("b");
  });

  it("tallies never decrease across a session", async () => {
    const api = new FakeApi([makeItem("a"), makeItem("b"), makeItem("c")]);
    const session = new UiSession(api, { curator: "ann", kind: "unlabeled" });
    await session.start();
    const seen: Array<[number, number]> = [[session.labeled, session.skipped]];
    await session.submit("+");
    seen.push([session.labeled, session.skipped]);
    await session.skip();
    seen.push([session.labeled, session.skipped]);
    await session.submit("-");
    seen.push([session.labeled, session.skipped]);
    for (let i = 1; i < seen.length; i++) {
      expect(seen[i][0]).toBeGreaterThanOrEqual(seen[i - 1][0]);
      expect(seen[i][1]).toBeGreaterThanOrEqual(seen[i - 1][1]);
    }
    expect(seen.at(-1)).toEqual([2, 1]);
  });
});
