/**
 * Typed client for the review-service HTTP API.
 *
 * The client does no verification or scoring of its own; it only moves
 * JSON between the service and the caller. Service-side failures become
 * ApiError (code + human-readable detail straight from the body); network
 * failures become ServiceUnreachable so the caller can show a retry
 * banner instead of a stack trace.
 */
import {
  Correction,
  Detail,
  detailSchema,
  errorBodySchema,
  QueuePage,
  queuePageSchema,
  SubmitResult,
  submitResultSchema,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ServiceUnreachable extends Error {
  constructor(cause: unknown) {
    super("review service unreachable");
    this.name = "ServiceUnreachable";
    this.cause = cause;
  }
}

export interface ClientConfig {
  baseUrl: string;
  token?: string;
  // injectable for tests; defaults to the platform fetch
  fetchImpl?: typeof fetch;
}

export interface ListOptions {
  status?: string;
  page?: number;
  pageSize?: number;
}

export class ReviewClient {
  private readonly baseUrl: string;
  private readonly token: string | undefined;
  private readonly fetchImpl: typeof fetch;

  constructor(config: ClientConfig) {
    this.baseUrl = config.baseUrl.replace(/\/+$/, "");
    this.token = config.token;
    this.fetchImpl = config.fetchImpl ?? fetch;
  }

  async listItems(options: ListOptions = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (options.status !== undefined) params.set("status", options.status);
    if (options.page !== undefined) params.set("page", String(options.page));
    if (options.pageSize !== undefined)
      params.set("page_size", String(options.pageSize));
    const query = params.size > 0 ? `?${params.toString()}` : "";
    const body = await this.request("GET", `/api/review${query}`);
    return queuePageSchema.parse(body);
  }

  async getItem(clipId: string): Promise<Detail> {
    const body = await this.request(
      "GET",
      `/api/review/${encodeURIComponent(clipId)}`,
    );
    return detailSchema.parse(body);
  }

  async submitCorrection(
    clipId: string,
    correction: Correction,
  ): Promise<SubmitResult> {
    const body = await this.request(
      "POST",
      `/api/review/${encodeURIComponent(clipId)}`,
      correction,
    );
    return submitResultSchema.parse(body);
  }

  /** Media URL for a <video> src; the token rides in the query string
   *  because media elements cannot set request headers. */
  mediaUrl(path: string): string {
    const absolute = `${this.baseUrl}${path}`;
    if (this.token === undefined) return absolute;
    const sep = path.includes("?") ? "&" : "?";
    return `${absolute}${sep}token=${encodeURIComponent(this.token)}`;
  }

  private async request(
    method: string,
    path: string,
    payload?: unknown,
  ): Promise<unknown> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (this.token !== undefined)
      headers["Authorization"] = `Bearer ${this.token}`;
    if (payload !== undefined) headers["Content-Type"] = "application/json";

    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: payload === undefined ? undefined : JSON.stringify(payload),
      });
    } catch (cause) {
      throw new ServiceUnreachable(cause);
    }

    if (response.ok) return response.json();

    let code = "error";
    let detail = `HTTP ${response.status}`;
    try {
      const parsed = errorBodySchema.parse(await response.json());
      code = parsed.error;
      detail = parsed.detail;
    } catch {
      // non-JSON error body; keep the status-line fallback
    }
    throw new ApiError(response.status, code, detail);
  }
}
