/**
 * Client-side span looping.
 *
 * The service only guarantees byte-range support, so the player loads the
 * whole file and the client keeps the playhead inside the clip: seek to
 * the span start on open, and on every timeupdate clamp stray positions
 * back. Looping past the end also returns to the start.
 */
import { Span } from "./types.js";

// timeupdate fires a few times per second, so allow a little drift before
// the end rather than cutting the last frames short
const END_SLACK_S = 0.05;

export function initialSeek(span: Span): number {
  return span.start_s;
}

/**
 * Where the playhead should jump, or null to leave it alone.
 * Call from the player's timeupdate handler with the current time.
 */
export function clampToSpan(currentS: number, span: Span): number | null {
  if (currentS < span.start_s) return span.start_s;
  if (currentS >= span.end_s - END_SLACK_S) return span.start_s;
  return null;
}

/** Position within the span as 0..1 for a progress indicator. */
export function spanProgress(currentS: number, span: Span): number {
  const length = span.end_s - span.start_s;
  if (length <= 0) return 0;
  const fraction = (currentS - span.start_s) / length;
  return Math.min(1, Math.max(0, fraction));
}

export function formatSpan(span: Span): string {
  return `${formatTime(span.start_s)}–${formatTime(span.end_s)}`;
}

export function formatTime(seconds: number): string {
  const whole = Math.max(0, Math.floor(seconds));
  const m = Math.floor(whole / 60);
  const s = whole % 60;
  return `${m}:${String(s).padStart(2, "0")}`;
}
