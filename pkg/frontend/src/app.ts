/**
 * Browser bootstrap: renders the store into a container and forwards DOM
 * events back to it. Re-render happens only on store changes; the form
 * draft is re-applied afterwards so a failed validation does not eat what
 * the reviewer typed.
 */
import { clampToSpan } from "./playback.js";
import { renderApp } from "./render.js";
import { ReviewStore } from "./store.js";
import { CorrectionForm } from "./validate.js";

export interface AppConfig {
  container: HTMLElement;
  store: ReviewStore;
}

export function mountApp({ container, store }: AppConfig): () => void {
  let draft: CorrectionForm = { rationale: "", emotion: "", reviewer: "" };

  function mediaUrlFor(): string {
    const detail = store.getState().detail;
    if (detail.phase !== "open") return "";
    return store.mediaUrl(detail.detail.media.url);
  }

  function applyDraft(): void {
    const form = container.querySelector<HTMLFormElement>(
      "form[data-action='submit-correction']",
    );
    if (form === null) return;
    const rationale = form.elements.namedItem("rationale") as HTMLTextAreaElement;
    const emotion = form.elements.namedItem("emotion") as HTMLSelectElement;
    const reviewer = form.elements.namedItem("reviewer") as HTMLInputElement;
    if (draft.rationale !== "") rationale.value = draft.rationale;
    if (draft.emotion !== "") emotion.value = draft.emotion;
    if (draft.reviewer !== "") reviewer.value = draft.reviewer;
  }

  function render(): void {
    container.innerHTML = renderApp(store.getState(), mediaUrlFor());
    applyDraft();
    const player = container.querySelector<HTMLVideoElement>(
      "video[data-role='player']",
    );
    if (player !== null) attachPlayer(player);
  }

  function attachPlayer(player: HTMLVideoElement): void {
    const span = {
      start_s: Number(player.dataset["startS"]),
      end_s: Number(player.dataset["endS"]),
    };
    player.addEventListener("loadedmetadata", () => {
      player.currentTime = span.start_s;
    });
    player.addEventListener("timeupdate", () => {
      const target = clampToSpan(player.currentTime, span);
      if (target !== null) player.currentTime = target;
    });
  }

  function readForm(form: HTMLFormElement): CorrectionForm {
    const data = new FormData(form);
    return {
      rationale: String(data.get("rationale") ?? ""),
      emotion: String(data.get("emotion") ?? ""),
      reviewer: String(data.get("reviewer") ?? ""),
    };
  }

  function onClick(event: Event): void {
    const target = (event.target as HTMLElement).closest<HTMLElement>(
      "[data-action]",
    );
    if (target === null) return;
    switch (target.dataset["action"]) {
      case "open":
        draft = { rationale: "", emotion: "", reviewer: "" };
        void store.openDetail(target.dataset["clipId"] ?? "");
        break;
      case "close":
        store.closeDetail();
        break;
      case "retry":
        void store.refreshQueue();
        break;
      case "page":
        void store.refreshQueue(Number(target.dataset["page"]));
        break;
      case "dismiss-toast":
        store.dismissToast();
        break;
    }
  }

  function onSubmit(event: Event): void {
    const form = event.target as HTMLFormElement;
    if (form.dataset["action"] !== "submit-correction") return;
    event.preventDefault();
    draft = readForm(form);
    void store.submitCorrection(draft);
  }

  container.addEventListener("click", onClick);
  container.addEventListener("submit", onSubmit);
  const unsubscribe = store.subscribe(render);
  render();
  void store.refreshQueue();

  return () => {
    unsubscribe();
    container.removeEventListener("click", onClick);
    container.removeEventListener("submit", onSubmit);
  };
}
