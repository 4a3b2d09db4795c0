/**
 * HTML renderers for the queue page. Pure string builders so they test
 * headlessly; app.ts swaps the results into the document and attaches
 * listeners via event delegation on data-* attributes.
 */
import { formatSpan, formatTime } from "./playback.js";
import { DetailState, QueueState, StoreState, Toast } from "./store.js";
import { Detail, EMOTIONS, ItemSummary, RoundRecord } from "./types.js";
import { FieldErrors } from "./validate.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function failureReason(item: ItemSummary): string {
  const failure = item.last_failure;
  if (failure === null) return "no recorded rounds";
  return `readers saw ${failure.path1} / ${failure.path2}, gold is ${failure.gold}`;
}

export function renderQueue(state: QueueState): string {
  switch (state.phase) {
    case "loading":
      return `<p class="loading">loading queue…</p>`;
    case "unreachable":
      return (
        `<div class="banner error" role="alert">` +
        `<span>${escapeHtml(state.message)}</span>` +
        `<button type="button" data-action="retry">retry</button></div>`
      );
    case "ready":
      break;
  }
  if (state.items.length === 0)
    return `<p class="empty">no clips waiting for review</p>`;

  const rows = state.items
    .map(
      (item) =>
        `<tr data-action="open" data-clip-id="${escapeHtml(item.clip_id)}">` +
        `<td class="clip-id">${escapeHtml(item.clip_id)}</td>` +
        `<td class="emotion">${escapeHtml(item.gold_emotion)}</td>` +
        `<td class="rounds">${item.rounds}</td>` +
        `<td class="reason">${escapeHtml(failureReason(item))}</td></tr>`,
    )
    .join("");
  const pages = Math.max(1, Math.ceil(state.total / state.pageSize));
  return (
    `<table class="queue"><thead><tr>` +
    `<th>clip</th><th>gold emotion</th><th>rounds</th><th>why it failed</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    `<nav class="pager">page ${state.page} of ${pages} (${state.total} items)` +
    (state.page > 1
      ? ` <button type="button" data-action="page" data-page="${state.page - 1}">prev</button>`
      : "") +
    (state.page < pages
      ? ` <button type="button" data-action="page" data-page="${state.page + 1}">next</button>`
      : "") +
    `</nav>`
  );
}

function renderHistoryCard(record: RoundRecord): string {
  const outcome = record.outcome;
  const sources =
    record.sources_present.length > 0
      ? record.sources_present.map(escapeHtml).join(", ")
      : "none";
  return (
    `<article class="round"><header>round ${record.round}</header>` +
    `<blockquote>${escapeHtml(record.text)}</blockquote>` +
    `<p class="sources">sources: ${sources}</p>` +
    `<p class="outcome">text-only read ${escapeHtml(outcome.path1)}, ` +
    `with-clip read ${escapeHtml(outcome.path2)}, gold ${escapeHtml(outcome.gold)}</p>` +
    `</article>`
  );
}

function fieldError(errors: FieldErrors, field: keyof FieldErrors): string {
  const message = errors[field];
  if (message === undefined) return "";
  return `<span class="field-error" data-field="${field}">${escapeHtml(message)}</span>`;
}

export function renderDetail(state: DetailState, mediaUrl: string): string {
  switch (state.phase) {
    case "closed":
      return "";
    case "loading":
      return `<p class="loading">loading ${escapeHtml(state.clipId)}…</p>`;
    case "not_found":
      return (
        `<div class="not-found"><h2>not found</h2>` +
        `<p>clip ${escapeHtml(state.clipId)} is not in the review queue</p>` +
        `<button type="button" data-action="close">back to queue</button></div>`
      );
    case "open":
      break;
  }
  const detail: Detail = state.detail;
  const item = detail.item;
  const span = { start_s: detail.media.start_s, end_s: detail.media.end_s };
  const history = item.history.map(renderHistoryCard).join("");
  const options = EMOTIONS.map(
    (e) =>
      `<option value="${e}"${e === item.gold_emotion ? " selected" : ""}>${e}</option>`,
  ).join("");
  const errors = state.fieldErrors;
  return (
    `<section class="detail" data-clip-id="${escapeHtml(item.clip_id)}">` +
    `<header><h2>${escapeHtml(item.clip_id)}</h2>` +
    `<p>gold emotion <strong>${escapeHtml(item.gold_emotion)}</strong>, ` +
    `clip ${formatSpan(span)} of ${formatTime(item.duration_s)}</p></header>` +
    `<video data-role="player" src="${escapeHtml(mediaUrl)}" controls ` +
    `data-start-s="${span.start_s}" data-end-s="${span.end_s}"></video>` +
    `<section class="history"><h3>failed rounds (${item.history.length})</h3>${history}</section>` +
    `<form data-action="submit-correction">` +
    `<label>rationale<textarea name="rationale" rows="6"></textarea>` +
    fieldError(errors, "rationale") +
    `</label>` +
    `<label>emotion<select name="emotion">${options}</select>` +
    fieldError(errors, "emotion") +
    `</label>` +
    `<label>reviewer<input name="reviewer" type="text">` +
    fieldError(errors, "reviewer") +
    `</label>` +
    `<button type="submit"${state.submitting ? " disabled" : ""}>` +
    (state.submitting ? "submitting…" : "submit correction") +
    `</button>` +
    `<button type="button" data-action="close">cancel</button>` +
    `</form></section>`
  );
}

export function renderToast(toast: Toast | null): string {
  if (toast === null) return "";
  return (
    `<div class="toast ${toast.kind}" role="status">` +
    `${escapeHtml(toast.message)}` +
    `<button type="button" data-action="dismiss-toast">×</button></div>`
  );
}

export function renderApp(state: StoreState, mediaUrl: string): string {
  return (
    `<main>` +
    `<h1>review queue</h1>` +
    renderToast(state.toast) +
    (state.detail.phase === "closed"
      ? renderQueue(state.queue)
      : renderDetail(state.detail, mediaUrl)) +
    `</main>`
  );
}
