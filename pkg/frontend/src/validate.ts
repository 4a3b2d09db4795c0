/**
 * Form-level checks that run before any request is sent. These guard
 * obviously unusable input; real validation (emotion canonicalization,
 * re-verification) stays on the service side.
 */
import { EMOTIONS } from "./types.js";

export interface CorrectionForm {
  rationale: string;
  emotion: string;
  reviewer: string;
}

export interface FieldErrors {
  rationale?: string;
  emotion?: string;
  reviewer?: string;
}

const EMOTION_SET: ReadonlySet<string> = new Set(EMOTIONS);

export function validateCorrection(form: CorrectionForm): FieldErrors {
  const errors: FieldErrors = {};
  if (form.rationale.trim() === "")
    errors.rationale = "rationale must not be empty";
  if (form.emotion === "") errors.emotion = "select an emotion";
  else if (!EMOTION_SET.has(form.emotion))
    errors.emotion = `unknown emotion ${form.emotion}`;
  if (form.reviewer.trim() === "")
    errors.reviewer = "reviewer name must not be empty";
  return errors;
}

export function isValid(errors: FieldErrors): boolean {
  return Object.keys(errors).length === 0;
}
