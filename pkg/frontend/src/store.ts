/**
 * View-model for the review queue page.
 *
 * Holds everything the renderer needs and nothing the service owns: after
 * any mutation the queue is re-fetched rather than patched locally, so
 * what the reviewer sees is always the service's answer. The store is
 * DOM-free, which is what the contract tests drive headlessly.
 */
import { ApiError, ReviewClient, ServiceUnreachable } from "./api.js";
import { Detail, ItemSummary } from "./types.js";
import {
  CorrectionForm,
  FieldErrors,
  isValid,
  validateCorrection,
} from "./validate.js";

export type QueueState =
  | { phase: "loading" }
  | {
      phase: "ready";
      items: ItemSummary[];
      total: number;
      page: number;
      pageSize: number;
    }
  | { phase: "unreachable"; message: string };

export type DetailState =
  | { phase: "closed" }
  | { phase: "loading"; clipId: string }
  | {
      phase: "open";
      detail: Detail;
      fieldErrors: FieldErrors;
      submitting: boolean;
    }
  | { phase: "not_found"; clipId: string };

export interface Toast {
  kind: "accepted" | "rejected" | "conflict" | "error";
  message: string;
}

export interface StoreState {
  queue: QueueState;
  detail: DetailState;
  toast: Toast | null;
}

export type Listener = (state: StoreState) => void;

export interface StoreOptions {
  pageSize?: number;
  // the queue page shows escalated work, so pending is the default lens
  statusFilter?: string;
}

export class ReviewStore {
  private state: StoreState = {
    queue: { phase: "loading" },
    detail: { phase: "closed" },
    toast: null,
  };
  private listeners: Listener[] = [];
  private readonly pageSize: number;
  private readonly statusFilter: string;

  constructor(
    private readonly client: ReviewClient,
    options: StoreOptions = {},
  ) {
    this.pageSize = options.pageSize ?? 20;
    this.statusFilter = options.statusFilter ?? "pending";
  }

  getState(): StoreState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  async refreshQueue(page?: number): Promise<void> {
    const current =
      page ??
      (this.state.queue.phase === "ready" ? this.state.queue.page : 1);
    this.patch({ queue: { phase: "loading" } });
    try {
      const result = await this.client.listItems({
        status: this.statusFilter,
        page: current,
        pageSize: this.pageSize,
      });
      this.patch({
        queue: {
          phase: "ready",
          items: result.items,
          total: result.total,
          page: result.page,
          pageSize: result.page_size,
        },
      });
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        this.patch({ queue: { phase: "unreachable", message: err.message } });
        return;
      }
      if (err instanceof ApiError) {
        this.patch({
          queue: { phase: "unreachable", message: err.detail },
          toast: { kind: "error", message: err.detail },
        });
        return;
      }
      throw err;
    }
  }

  async openDetail(clipId: string): Promise<void> {
    this.patch({ detail: { phase: "loading", clipId } });
    try {
      const detail = await this.client.getItem(clipId);
      this.patch({
        detail: { phase: "open", detail, fieldErrors: {}, submitting: false },
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.patch({ detail: { phase: "not_found", clipId } });
        return;
      }
      if (err instanceof ServiceUnreachable) {
        this.patch({
          detail: { phase: "closed" },
          toast: { kind: "error", message: err.message },
        });
        return;
      }
      throw err;
    }
  }

  closeDetail(): void {
    this.patch({ detail: { phase: "closed" } });
  }

  dismissToast(): void {
    this.patch({ toast: null });
  }

  /**
   * Validate locally, then round-trip through the service. Invalid forms
   * never produce a request; the field errors land on the open detail.
   */
  async submitCorrection(form: CorrectionForm): Promise<void> {
    const open = this.state.detail;
    if (open.phase !== "open")
      throw new Error("submitCorrection requires an open detail view");

    const fieldErrors = validateCorrection(form);
    if (!isValid(fieldErrors)) {
      this.patch({ detail: { ...open, fieldErrors } });
      return;
    }

    this.patch({ detail: { ...open, fieldErrors: {}, submitting: true } });
    const clipId = open.detail.item.clip_id;
    try {
      const result = await this.client.submitCorrection(clipId, form);
      const toast: Toast = result.accepted
        ? { kind: "accepted", message: `correction for ${clipId} accepted` }
        : {
            kind: "rejected",
            message: `correction for ${clipId} failed re-verification`,
          };
      this.patch({ detail: { phase: "closed" }, toast });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.patch({
          detail: { phase: "closed" },
          toast: { kind: "conflict", message: err.detail },
        });
      } else if (err instanceof ApiError) {
        // service rejected the form; surface its wording untouched
        this.patch({
          detail: { ...open, submitting: false },
          toast: { kind: "error", message: err.detail },
        });
        return;
      } else if (err instanceof ServiceUnreachable) {
        this.patch({
          detail: { ...open, submitting: false },
          toast: { kind: "error", message: err.message },
        });
        return;
      } else {
        throw err;
      }
    }
    await this.refreshQueue();
  }

  mediaUrl(path: string): string {
    return this.client.mediaUrl(path);
  }

  private patch(partial: Partial<StoreState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }
}
