export { ApiError, ReviewClient, ServiceUnreachable } from "./api.js";
export type { ClientConfig, ListOptions } from "./api.js";
export { mountApp } from "./app.js";
export type { AppConfig } from "./app.js";
export {
  clampToSpan,
  formatSpan,
  formatTime,
  initialSeek,
  spanProgress,
} from "./playback.js";
export {
  escapeHtml,
  renderApp,
  renderDetail,
  renderQueue,
  renderToast,
} from "./render.js";
export { ReviewStore } from "./store.js";
export type {
  DetailState,
  Listener,
  QueueState,
  StoreOptions,
  StoreState,
  Toast,
} from "./store.js";
export { EMOTIONS, REVIEW_STATUSES } from "./types.js";
export type {
  Correction,
  Detail,
  Emotion,
  ItemSummary,
  QueuePage,
  ReviewItem,
  ReviewStatus,
  RoundRecord,
  Span,
  SubmitResult,
} from "./types.js";
export { isValid, validateCorrection } from "./validate.js";
export type { CorrectionForm, FieldErrors } from "./validate.js";
