/**
 * Wire types for the review-service JSON API.
 *
 * Everything here mirrors the service responses one-to-one; the schemas
 * reject anything shaped differently so a contract drift fails loudly in
 * the client instead of rendering garbage.
 */
import { z } from "zod";

export const EMOTIONS = [
  "anger",
  "anticipation",
  "disgust",
  "fear",
  "horror",
  "joy",
  "love",
  "neutral",
  "pride",
  "sadness",
  "satisfaction",
  "surprise",
  "trust",
] as const;
export type Emotion = (typeof EMOTIONS)[number];

export const REVIEW_STATUSES = ["pending", "corrected", "accepted"] as const;
export type ReviewStatus = (typeof REVIEW_STATUSES)[number];

const emotionSchema = z.enum(EMOTIONS);

// last_failure on summaries omits `accepted`; full outcomes carry it
const failureSchema = z.object({
  path1: emotionSchema,
  path2: emotionSchema,
  gold: emotionSchema,
});

const outcomeSchema = failureSchema.extend({ accepted: z.boolean() });

export const itemSummarySchema = z.object({
  clip_id: z.string(),
  video_id: z.string(),
  gold_emotion: emotionSchema,
  status: z.enum(REVIEW_STATUSES),
  escalated_at: z.number(),
  rounds: z.number(),
  last_failure: failureSchema.nullable(),
});
export type ItemSummary = z.infer<typeof itemSummarySchema>;

export const queuePageSchema = z.object({
  items: z.array(itemSummarySchema),
  total: z.number(),
  page: z.number(),
  page_size: z.number(),
});
export type QueuePage = z.infer<typeof queuePageSchema>;

const roundRecordSchema = z.object({
  round: z.number(),
  text: z.string(),
  sources_present: z.array(z.string()),
  outcome: outcomeSchema,
});
export type RoundRecord = z.infer<typeof roundRecordSchema>;

export const reviewItemSchema = z.object({
  clip_id: z.string(),
  video_id: z.string(),
  media_uri: z.string(),
  duration_s: z.number(),
  start_s: z.number(),
  end_s: z.number(),
  gold_emotion: emotionSchema,
  status: z.enum(REVIEW_STATUSES),
  escalated_at: z.number(),
  history: z.array(roundRecordSchema),
  correction: z
    .object({
      rationale: z.string(),
      emotion: emotionSchema,
      reviewer: z.string(),
      at: z.number(),
    })
    .nullable(),
  audit_failure: outcomeSchema.nullable(),
});
export type ReviewItem = z.infer<typeof reviewItemSchema>;

export const detailSchema = z.object({
  item: reviewItemSchema,
  media: z.object({
    url: z.string(),
    start_s: z.number(),
    end_s: z.number(),
  }),
});
export type Detail = z.infer<typeof detailSchema>;

export const submitResultSchema = z.object({
  item: reviewItemSchema,
  accepted: z.boolean(),
});
export type SubmitResult = z.infer<typeof submitResultSchema>;

export const errorBodySchema = z.object({
  error: z.string(),
  detail: z.string(),
});

export interface Correction {
  rationale: string;
  emotion: string;
  reviewer: string;
}

export interface Span {
  start_s: number;
  end_s: number;
}
