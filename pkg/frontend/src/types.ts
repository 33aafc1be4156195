/** Wire types for the labeling service API. Field names match the JSON payloads. */

export type QueueKind = "unlabeled" | "review";

export type BinaryLabel = "+" | "-";

export interface PairInfo {
  pair_id: string;
  job_title: string;
  skill: string;
}

export interface VideoStats {
  view_count: number;
  like_count: number;
  dislike_count: number;
  comment_count: number;
  duration_s: number;
  published_at: string;
}

export interface VideoInfo {
  video_id: string;
  title: string;
  description: string;
  watch_url: string;
  stats: VideoStats;
}

export interface QueueItem {
  queue_kind: QueueKind;
  pair: PairInfo;
  video: VideoInfo | null;
  retrieval_rank: number;
  query_forms: string[];
  model_proba: number | null;
  lease_seconds: number;
}

export interface QueueResponse {
  item: QueueItem | null;
}

export interface ServiceStats {
  total: number;
  labeled: number;
  positive_fraction: number;
  per_pair_coverage: number;
}

export interface LabelDecision {
  pair_id: string;
  video_id: string;
  label: BinaryLabel;
  curator_id: string;
}
