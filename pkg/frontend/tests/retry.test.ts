import { describe, expect, it } from "vitest";

import { PendingQueue } from "../src/retry.js";
import type { LabelDecision } from "../src/types.js";

function decision(videoId: string): LabelDecision {
  return { pair_id: "p1", video_id: videoId, label: "+", curator_id: "ann" };
}

describe("PendingQueue", () => {
  it("flushes queued decisions in order", async () => {
    const posted: string[] = [];
    const queue = new PendingQueue(async (d) => {
      posted.push(d.video_id);
    });
    queue.enqueue(decision("a"));
    queue.enqueue(decision("b"));
    expect(queue.size).toBe(2);

    expect(await queue.flush()).toBe(2);
    expect(posted).toEqual(["a", "b"]);
    expect(queue.size).toBe(0);
  });

  it("stops at the first failure and keeps the rest queued", async () => {
    const posted: string[] = [];
    let failures = 1;
    const queue = new PendingQueue(async (d) => {
      if (d.video_id === "b" && failures > 0) {
        failures -= 1;
        throw new Error("offline");
      }
      posted.push(d.video_id);
    });
    queue.enqueue(decision("a"));
    queue.enqueue(decision("b"));
    queue.enqueue(decision("c"));

    expect(await queue.flush()).toBe(1);
    expect(posted).toEqual(["a"]);
    expect(queue.size).toBe(2);

    expect(await queue.flush()).toBe(2);
    expect(posted).toEqual(["a", "b", "c"]);
  });

  it("reports size changes to the listener", async () => {
    const sizes: number[] = [];
    const queue = new PendingQueue(
      async () => {},
      (size) => sizes.push(size),
    );
    queue.enqueue(decision("a"));
    queue.enqueue(decision("b"));
    await queue.flush();
    expect(sizes).toEqual([1, 2, 1, 0]);
  });
});
