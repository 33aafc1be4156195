/** Thin fetch client for the labeling service endpoints. */

import type {
  BinaryLabel,
  LabelDecision,
  QueueItem,
  QueueKind,
  QueueResponse,
  ServiceStats,
} from "./types.js";

export class HttpError extends Error {
  constructor(
    readonly status: number,
    readonly body: string,
  ) {
    super(`HTTP ${status}: ${body}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ProbaBand {
  lo: number;
  hi: number;
}

/** What a labeling session needs from the service; ApiClient is the real one. */
export interface LabelApi {
  fetchNext(curator: string, kind: QueueKind, band?: ProbaBand): Promise<QueueItem | null>;
  postLabel(decision: LabelDecision): Promise<BinaryLabel>;
  releaseLease(pair_id: string, video_id: string, curator_id: string): Promise<boolean>;
  fetchStats(): Promise<ServiceStats>;
}

export class ApiClient implements LabelApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      const text = await res.text().catch(() => "");
      throw new HttpError(res.status, text);
    }
    return res.json() as Promise<T>;
  }

  async fetchNext(
    curator: string,
    kind: QueueKind,
    band?: ProbaBand,
  ): Promise<QueueItem | null> {
    const params = new URLSearchParams({ curator, kind });
    if (band) {
      params.set("lo", String(band.lo));
      params.set("hi", String(band.hi));
    }
    const res = await this.json<QueueResponse>(`/api/queue/next?${params}`);
    return res.item;
  }

  async postLabel(decision: LabelDecision): Promise<BinaryLabel> {
    const res = await this.json<{ effective_label: BinaryLabel }>("/api/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
    return res.effective_label;
  }

  async releaseLease(pair_id: string, video_id: string, curator_id: string): Promise<boolean> {
    const res = await this.json<{ released: boolean }>("/api/queue/release", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_id, video_id, curator_id }),
    });
    return res.released;
  }

  async fetchStats(): Promise<ServiceStats> {
    return this.json<ServiceStats>("/api/stats");
  }
}
