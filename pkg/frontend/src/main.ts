/** Browser entry point: wires the session, keyboard, and rendering together.
 * Query string knobs: ?curator=<id>&kind=unlabeled|review&lo=0.4&hi=0.6
 */

import { ApiClient } from "./api.js";
import { bindKeys } from "./keyboard.js";
import { renderEmpty, renderItem, renderStats, renderTallies } from "./render.js";
import { UiSession } from "./session.js";
import type { QueueKind } from "./types.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const curator = param("curator", "anonymous");
const kind = (param("kind", "unlabeled") === "review" ? "review" : "unlabeled") as QueueKind;
const lo = Number(param("lo", "0"));
const hi = Number(param("hi", "1"));

const app = document.getElementById("app")!;
const statsLine = document.getElementById("stats")!;
const tallyLine = document.getElementById("tallies")!;
const noticeLine = document.getElementById("notice")!;

const api = new ApiClient("");
const session = new UiSession(api, {
  curator,
  kind,
  band: kind === "review" ? { lo, hi } : undefined,
  onNotice(message) {
    noticeLine.textContent = message;
  },
  onUpdate() {
    app.innerHTML = session.current
      ? renderItem(session.current, new Date())
      : renderEmpty(kind);
    statsLine.innerHTML = renderStats(session.stats);
    tallyLine.innerHTML = renderTallies(session.labeled, session.skipped, session.pending.size);
  },
});

bindKeys(window, {
  relevant: () => void session.submit("+"),
  irrelevant: () => void session.submit("-"),
  skip: () => void session.skip(),
});
document.getElementById("btn-relevant")?.addEventListener("click", () => void session.submit("+"));
document.getElementById("btn-irrelevant")?.addEventListener("click", () => void session.submit("-"));
document.getElementById("btn-skip")?.addEventListener("click", () => void session.skip());

window.addEventListener("online", () => void session.reconnect());
setInterval(() => void session.reconnect(), 10_000);

void session.refreshStats().then(() => session.start());
