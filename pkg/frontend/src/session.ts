/** One curator's labeling session: a single active item, submit/skip, tallies.
 *
 * Decisions post to the server immediately; when the network is down they are
 * parked in a PendingQueue and re-sent by reconnect(). The session keeps at
 * most one active item and never re-enters while a decision is in flight.
 */

import { HttpError, type LabelApi, type ProbaBand } from "./api.js";
import { PendingQueue } from "./retry.js";
import type { BinaryLabel, QueueItem, QueueKind, ServiceStats } from "./types.js";

export interface SessionOptions {
  curator: string;
  kind: QueueKind;
  band?: ProbaBand;
  /** Called with user-facing notices (offline, rejected decisions). */
  onNotice?: (message: string) => void;
  /** Called after every state change so the host can re-render. */
  onUpdate?: () => void;
}

export class UiSession {
  current: QueueItem | null = null;
  labeled = 0;
  skipped = 0;
  stats: ServiceStats | null = null;
  drained = false;
  readonly pending: PendingQueue;

  private busy = false;

  constructor(
    private api: LabelApi,
    private opts: SessionOptions,
  ) {
    this.pending = new PendingQueue((decision) => this.api.postLabel(decision));
  }

  get curator(): string {
    return this.opts.curator;
  }

  get kind(): QueueKind {
    return this.opts.kind;
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Label the active item. Returns false when there is no item or another
   * decision is still in flight (the keystroke is dropped, not queued). */
  async submit(label: BinaryLabel): Promise<boolean> {
    const item = this.current;
    if (this.busy || item === null || item.video === null) {
      return false;
    }
    this.busy = true;
    const decision = {
      pair_id: item.pair.pair_id,
      video_id: item.video.video_id,
      label,
      curator_id: this.opts.curator,
    };
    try {
      try {
        await this.api.postLabel(decision);
        this.labeled += 1;
        await this.refreshStats();
      } catch (error) {
        if (error instanceof HttpError) {
          this.opts.onNotice?.(`label rejected (${error.status}); skipping item`);
        } else {
          this.pending.enqueue(decision);
          this.labeled += 1;
          this.opts.onNotice?.(
            `offline: decision saved locally (${this.pending.size} pending)`,
          );
        }
      }
      this.current = null;
      await this.advance();
    } finally {
      this.busy = false;
    }
    return true;
  }

  /** Release the active item without labeling it and move on. */
  async skip(): Promise<boolean> {
    if (this.busy || this.current === null) {
      return false;
    }
    this.busy = true;
    const item = this.current;
    try {
      if (item.video !== null) {
        try {
          await this.api.releaseLease(
            item.pair.pair_id,
            item.video.video_id,
            this.opts.curator,
          );
        } catch {
          // the lease expires on its own; skipping must not block on the network
        }
      }
      this.skipped += 1;
      this.current = null;
      await this.advance();
    } finally {
      this.busy = false;
    }
    return true;
  }

  /** Retry parked decisions, then refresh stats. Call on reconnect or timer. */
  async reconnect(): Promise<void> {
    const cleared = await this.pending.flush();
    if (cleared > 0) {
      this.opts.onNotice?.(`reconnected: ${cleared} queued decision(s) delivered`);
      await this.refreshStats();
    }
  }

  async refreshStats(): Promise<void> {
    try {
      this.stats = await this.api.fetchStats();
    } catch {
      // stats are advisory; keep the last known values
    }
    this.opts.onUpdate?.();
  }

  private async advance(): Promise<void> {
    try {
      this.current = await this.api.fetchNext(
        this.opts.curator,
        this.opts.kind,
        this.opts.band,
      );
    } catch (error) {
      this.current = null;
      this.opts.onNotice?.(`could not fetch the next item: ${String(error)}`);
    }
    this.drained = this.current === null;
    this.opts.onUpdate?.();
  }
}
