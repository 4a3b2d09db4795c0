import { describe, expect, it } from "vitest";

import {
  clampToSpan,
  formatSpan,
  formatTime,
  initialSeek,
  spanProgress,
} from "../src/playback.js";

const SPAN = { start_s: 8, end_s: 20 };

describe("clampToSpan", () => {
  it("sends a playhead before the span back to the start", () => {
    expect(clampToSpan(0, SPAN)).toBe(8);
    expect(clampToSpan(7.99, SPAN)).toBe(8);
  });

  it("leaves the playhead alone inside the span", () => {
    expect(clampToSpan(8, SPAN)).toBeNull();
    expect(clampToSpan(14.2, SPAN)).toBeNull();
    expect(clampToSpan(19.9, SPAN)).toBeNull();
  });

  it("loops back to the start at the end", () => {
    expect(clampToSpan(20, SPAN)).toBe(8);
    expect(clampToSpan(25, SPAN)).toBe(8);
    // within the slack window just before the end counts as done
    expect(clampToSpan(19.96, SPAN)).toBe(8);
  });

  it("starts playback at the span start", () => {
    expect(initialSeek(SPAN)).toBe(8);
  });
});

describe("spanProgress", () => {
  it("maps the span onto 0..1", () => {
    expect(spanProgress(8, SPAN)).toBe(0);
    expect(spanProgress(14, SPAN)).toBe(0.5);
    expect(spanProgress(20, SPAN)).toBe(1);
  });

  it("clamps outside positions", () => {
    expect(spanProgress(2, SPAN)).toBe(0);
    expect(spanProgress(50, SPAN)).toBe(1);
  });

  it("degrades to zero on an empty span", () => {
    expect(spanProgress(5, { start_s: 5, end_s: 5 })).toBe(0);
  });
});

describe("time formatting", () => {
  it("renders m:ss", () => {
    expect(formatTime(0)).toBe("0:00");
    expect(formatTime(8)).toBe("0:08");
    expect(formatTime(65)).toBe("1:05");
    expect(formatTime(600)).toBe("10:00");
  });

  it("renders spans with an en dash", () => {
    expect(formatSpan(SPAN)).toBe("0:08–0:20");
  });
});
