/** Holds label decisions that could not reach the server, for later retry.
 *
 * The label log is last-write-wins on the server side, so re-posting a
 * decision that actually landed is harmless: the effective label is the same.
 */

import type { LabelDecision } from "./types.js";

export class PendingQueue {
  private items: LabelDecision[] = [];

  constructor(
    private post: (decision: LabelDecision) => Promise<unknown>,
    private onChange?: (size: number) => void,
  ) {}

  get size(): number {
    return this.items.length;
  }

  enqueue(decision: LabelDecision): void {
    this.items.push(decision);
    this.onChange?.(this.items.length);
  }

  /** Re-post queued decisions in order; stops at the first failure.
   * Returns how many cleared. */
  async flush(): Promise<number> {
    let cleared = 0;
    while (this.items.length > 0) {
      try {
        await this.post(this.items[0]);
      } catch {
        break;
      }
      this.items.shift();
      cleared += 1;
      this.onChange?.(this.items.length);
    }
    return cleared;
  }
}
