/** HTML builders for the single-item focus view. Pure string functions so the
 * rendering rules are testable without a browser. Every displayed number
 * comes straight from the API payload; missing fields render as an em dash.
 */

import type { QueueItem, ServiceStats } from "./types.js";

const DASH = "—";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Whole days since the video was published, from the payload's timestamp. */
export function daysElapsed(publishedAt: string, now: Date): number | null {
  const published = Date.parse(publishedAt);
  if (Number.isNaN(published)) {
    return null;
  }
  return Math.floor((now.getTime() - published) / 86_400_000);
}

function textOrDash(value: string | null | undefined): string {
  return value ? esc(value) : DASH;
}

function countRow(name: string, value: number | null | undefined): string {
  const shown = value === null || value === undefined ? DASH : String(value);
  return `<div class="stat"><span class="stat-name">${name}</span><span class="stat-value">${shown}</span></div>`;
}

export function renderItem(item: QueueItem, now: Date): string {
  const video = item.video;
  const stats = video?.stats;
  const days = stats ? daysElapsed(stats.published_at, now) : null;

  const badge =
    item.queue_kind === "review" && item.model_proba !== null
      ? `<span class="badge" data-proba="${item.model_proba}">p=${item.model_proba.toFixed(2)}</span>`
      : "";
  const watch = video
    ? `<a class="watch" href="${esc(video.watch_url)}" target="_blank" rel="noopener">watch ↗</a>`
    : DASH;

  return [
    `<div class="item">`,
    `<div class="pair"><span class="job-title">${textOrDash(item.pair.job_title)}</span>`,
    `<span class="sep">/</span>`,
    `<span class="skill">${textOrDash(item.pair.skill)}</span>${badge}</div>`,
    `<h2 class="video-title">${textOrDash(video?.title)}</h2>`,
    `<p class="description">${textOrDash(video?.description)}</p>`,
    `<div class="stats">`,
    countRow("views", stats?.view_count),
    countRow("likes", stats?.like_count),
    countRow("dislikes", stats?.dislike_count),
    countRow("comments", stats?.comment_count),
    countRow("duration s", stats?.duration_s),
    countRow("days old", days),
    `</div>`,
    `<div class="actions">${watch}</div>`,
    `</div>`,
  ].join("\n");
}

export function renderEmpty(kind: string): string {
  return `<div class="item empty">No more ${esc(kind)} items. ${DASH}</div>`;
}

export function renderStats(stats: ServiceStats | null): string {
  if (stats === null) {
    return `<span class="muted">stats unavailable</span>`;
  }
  const pct = (value: number) => `${(value * 100).toFixed(1)}%`;
  return [
    `labeled ${stats.labeled}/${stats.total}`,
    `positive ${pct(stats.positive_fraction)}`,
    `pair coverage ${pct(stats.per_pair_coverage)}`,
  ].join(" · ");
}

export function renderTallies(labeled: number, skipped: number, pendingCount: number): string {
  const pending = pendingCount > 0 ? ` · <b>${pendingCount} pending retry</b>` : "";
  return `this session: ${labeled} labeled · ${skipped} skipped${pending}`;
}
