import { describe, expect, it } from "vitest";

import { EMOTIONS } from "../src/types.js";
import { isValid, validateCorrection } from "../src/validate.js";

const GOOD = {
  rationale: "vocal_tone: a flat, exhausted delivery",
  emotion: "sadness",
  reviewer: "r1",
};

describe("validateCorrection", () => {
  it("accepts a complete form", () => {
    expect(validateCorrection(GOOD)).toEqual({});
    expect(isValid(validateCorrection(GOOD))).toBe(true);
  });

  it("accepts every canonical emotion", () => {
    for (const emotion of EMOTIONS)
      expect(validateCorrection({ ...GOOD, emotion })).toEqual({});
  });

  it("rejects blank rationale", () => {
    for (const rationale of ["", "   ", "\n\t"]) {
      const errors = validateCorrection({ ...GOOD, rationale });
      expect(errors.rationale).toBe("rationale must not be empty");
      expect(isValid(errors)).toBe(false);
    }
  });

  it("rejects a missing emotion selection", () => {
    expect(validateCorrection({ ...GOOD, emotion: "" }).emotion).toBe(
      "select an emotion",
    );
  });

  it("rejects emotions outside the canonical set", () => {
    expect(validateCorrection({ ...GOOD, emotion: "blissful" }).emotion).toBe(
      "unknown emotion blissful",
    );
    // no alias handling on the client; that belongs to the service
    expect(validateCorrection({ ...GOOD, emotion: "Angry" }).emotion).toBe(
      "unknown emotion Angry",
    );
  });

  it("rejects blank reviewer", () => {
    expect(validateCorrection({ ...GOOD, reviewer: " " }).reviewer).toBe(
      "reviewer name must not be empty",
    );
  });

  it("reports all problems at once", () => {
    const errors = validateCorrection({
      rationale: "",
      emotion: "nope",
      reviewer: "",
    });
    expect(Object.keys(errors).sort()).toEqual([
      "emotion",
      "rationale",
      "reviewer",
    ]);
  });
});
