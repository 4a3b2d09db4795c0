import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ReviewClient } from "../src/api.js";
import { ReviewStore, StoreState } from "../src/store.js";
import { makeItem, StubService } from "./stub_server.js";

const CORRECTION = {
  rationale: "event_content: the reunion at the gate",
  emotion: "joy",
  reviewer: "r1",
};

describe("ReviewStore", () => {
  let stub: StubService;
  let store: ReviewStore;

  beforeEach(async () => {
    stub = new StubService(
      [
        makeItem({ clip_id: "c1", escalated_at: 1.0 }),
        makeItem({ clip_id: "c2", escalated_at: 2.0 }),
      ],
      { verdicts: { c2: false } },
    );
    const baseUrl = await stub.start();
    store = new ReviewStore(new ReviewClient({ baseUrl }));
  });

  afterEach(async () => {
    await stub.stop();
  });

  it("notifies subscribers on every change and supports unsubscribe", async () => {
    const seen: StoreState[] = [];
    const unsubscribe = store.subscribe((s) => seen.push(s));
    await store.refreshQueue();
    expect(seen.map((s) => s.queue.phase)).toEqual(["loading", "ready"]);
    unsubscribe();
    await store.refreshQueue();
    expect(seen).toHaveLength(2);
  });

  it("requests only pending items for the queue view", async () => {
    await store.refreshQueue();
    expect(stub.log[0]?.path).toContain("status=pending");
  });

  it("an invalid form never reaches the service", async () => {
    await store.refreshQueue();
    await store.openDetail("c1");
    const before = stub.log.length;

    await store.submitCorrection({ rationale: "  ", emotion: "", reviewer: "" });

    const detail = store.getState().detail;
    expect(detail.phase).toBe("open");
    if (detail.phase !== "open") return;
    expect(detail.fieldErrors.rationale).toBe("rationale must not be empty");
    expect(detail.fieldErrors.emotion).toBe("select an emotion");
    expect(detail.fieldErrors.reviewer).toBe("reviewer name must not be empty");
    expect(stub.log.length).toBe(before);
  });

  it("a failed re-verification shows the rejected outcome", async () => {
    await store.refreshQueue();
    await store.openDetail("c2");
    await store.submitCorrection(CORRECTION);

    const state = store.getState();
    expect(state.toast).toEqual({
      kind: "rejected",
      message: "correction for c2 failed re-verification",
    });
    // the item left pending either way; the service decided how
    if (state.queue.phase !== "ready") throw new Error("queue not ready");
    expect(state.queue.items.map((i) => i.clip_id)).toEqual(["c1"]);
    expect(stub.items.get("c2")?.status).toBe("corrected");
  });

  it("server-side rejection keeps the form open with the service wording", async () => {
    // form passes local checks; the service still says no (canonicalization,
    // auditing rules, anything the client does not reimplement)
    const rejecting = (async (input: RequestInfo | URL, init?: RequestInit) => {
      if (init?.method === "POST")
        return new Response(
          JSON.stringify({
            error: "validation",
            detail: "<rationale>: must cite at least one evidence source",
          }),
          { status: 422, headers: { "Content-Type": "application/json" } },
        );
      return fetch(input, init);
    }) as typeof fetch;
    const picky = new ReviewStore(
      new ReviewClient({ baseUrl: stub.baseUrl, fetchImpl: rejecting }),
    );
    await picky.refreshQueue();
    await picky.openDetail("c1");
    await picky.submitCorrection(CORRECTION);

    const state = picky.getState();
    expect(state.detail.phase).toBe("open");
    expect(state.toast).toEqual({
      kind: "error",
      message: "<rationale>: must cite at least one evidence source",
    });
  });

  it("unknown clip id lands on the not-found state", async () => {
    await store.openDetail("ghost");
    expect(store.getState().detail).toEqual({
      phase: "not_found",
      clipId: "ghost",
    });
  });

  it("a dead service raises the banner and retry works after restart", async () => {
    const deadStore = new ReviewStore(
      new ReviewClient({ baseUrl: "http://127.0.0.1:9" }),
    );
    await deadStore.refreshQueue();
    expect(deadStore.getState().queue).toEqual({
      phase: "unreachable",
      message: "review service unreachable",
    });

    // retry against the live stub succeeds
    await store.refreshQueue();
    expect(store.getState().queue.phase).toBe("ready");
  });

  it("paging keeps the requested page", async () => {
    const small = new ReviewStore(
      new ReviewClient({ baseUrl: stub.baseUrl }),
      { pageSize: 1 },
    );
    await small.refreshQueue(2);
    const queue = small.getState().queue;
    if (queue.phase !== "ready") throw new Error("queue not ready");
    expect(queue.page).toBe(2);
    expect(queue.items.map((i) => i.clip_id)).toEqual(["c2"]);
  });

  it("dismissToast clears the toast", async () => {
    await store.refreshQueue();
    await store.openDetail("c1");
    await store.submitCorrection(CORRECTION);
    expect(store.getState().toast).not.toBeNull();
    store.dismissToast();
    expect(store.getState().toast).toBeNull();
  });

  it("submitting without an open detail is a programming error", async () => {
    await expect(store.submitCorrection(CORRECTION)).rejects.toThrow(
      /open detail/,
    );
  });
});
