"""Stage 2/3 of corpus construction: rationales, verification, queries.

For each labelled clip the pipeline drafts a fact-based local chain of
thought, verifies it by asking two independent readers (text-only and
text-plus-clip) to name the emotion, and accepts the draft only when both
agree with the gold label. Three failed rounds escalate the clip to a
manual review queue, whose corrections are audited by the same dual-path
check before the clip is accepted.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from . import jsonl
from .backends.base import Backend, BackendRequest, Task, with_retry
from .domain import (
    AffectiveClip,
    DatasetRecord,
    EmotionLabel,
    MediaRef,
    QueryStyle,
    TimeSpan,
    VagueQuery,
    canonicalize_emotion,
)
from .errors import (
    ItemNotPending,
    MalformedModelOutput,
    NotFound,
    QueryGenerationFailed,
    ValidationError,
)
from .prompts import render_prompt

# The four factual grounds a draft rationale must draw on.
EVIDENCE_SOURCES: Tuple[str, ...] = (
    "visual_style",
    "visual_semantics",
    "vocal_prosody",
    "cinematic_language",
)

MAX_ROUNDS = 3

_EMOTION_MENU = ", ".join(e.value for e in EmotionLabel)


@dataclass(frozen=True)
class CotDraft:
    clip_id: str
    text: str
    sources_present: Tuple[str, ...]
    round: int


@dataclass(frozen=True)
class VerificationOutcome:
    path1: EmotionLabel
    path2: EmotionLabel
    gold: EmotionLabel

    @property
    def accepted(self) -> bool:
        return self.path1 is self.gold and self.path2 is self.gold


@dataclass(frozen=True)
class RoundRecord:
    draft: CotDraft
    outcome: VerificationOutcome


@dataclass(frozen=True)
class AcceptedRationale:
    clip_id: str
    text: str
    rounds_used: int
    history: Tuple[RoundRecord, ...]


class ReviewStatus(str, Enum):
    PENDING = "pending"
    CORRECTED = "corrected"
    ACCEPTED = "accepted"


@dataclass(frozen=True)
class Correction:
    rationale: str
    emotion: EmotionLabel
    reviewer: str
    at: float


@dataclass(frozen=True)
class ReviewItem:
    clip_id: str
    media: MediaRef
    span: TimeSpan
    gold_emotion: EmotionLabel
    history: Tuple[RoundRecord, ...]
    status: ReviewStatus = ReviewStatus.PENDING
    escalated_at: float = 0.0
    correction: Optional[Correction] = None
    audit_failure: Optional[VerificationOutcome] = None


AnnotationResult = Union[AcceptedRationale, ReviewItem]


# ---------------------------------------------------------------- generation


def sources_in(text: str) -> Tuple[str, ...]:
    low = text.lower()
    return tuple(s for s in EVIDENCE_SOURCES if s in low)


def generate_local_cot(backend: Backend, media: MediaRef, span: TimeSpan,
                       gold: EmotionLabel, clip_id: str, *, round_no: int = 1,
                       attempt: int = 1, retry_attempts: int = 3) -> CotDraft:
    """Draft a fact-grounded rationale for one clip.

    A draft citing none of the four evidence sources is structurally
    rejected and regenerated once within the same round; a second empty
    draft raises MalformedModelOutput.
    """
    text = ""
    for extra in (0, 1):
        text_prompt = render_prompt("cot_generate",
                                    start_s=f"{span.start_s:g}",
                                    end_s=f"{span.end_s:g}",
                                    emotion=gold.value)
        request = BackendRequest(
            task=Task.COT_GENERATE, prompt=text_prompt, media=media, span=span,
            context={"emotion": gold.value, "attempt": str(attempt + extra)})
        response = with_retry(backend, request, retry_attempts)
        text = response.structured["text"]
        present = sources_in(text)
        if present:
            return CotDraft(clip_id=clip_id, text=text,
                            sources_present=present, round=round_no)
    raise MalformedModelOutput(
        f"{clip_id}: draft cites none of the evidence sources "
        f"{', '.join(EVIDENCE_SOURCES)} after regeneration", raw=text)


def dual_path_verify(backend: Backend, media: MediaRef, span: TimeSpan,
                     draft_text: str, gold: EmotionLabel, *,
                     attempt: int = 1, retry_attempts: int = 3) -> VerificationOutcome:
    """Ask two independent readers to label the emotion: one sees only the
    draft text, the other sees the text plus the clip. Acceptance requires
    unanimous agreement with the gold label."""
    ctx = {"text": draft_text, "fixture_key": draft_text, "attempt": str(attempt)}
    p1 = BackendRequest(
        task=Task.EMOTION_FROM_TEXT,
        prompt=render_prompt("emotion_from_text", emotions=_EMOTION_MENU, text=draft_text),
        context=ctx)
    p2 = BackendRequest(
        task=Task.EMOTION_FROM_TEXT_AND_CLIP,
        prompt=render_prompt("emotion_from_text_and_clip", emotions=_EMOTION_MENU,
                             text=draft_text, start_s=f"{span.start_s:g}",
                             end_s=f"{span.end_s:g}"),
        media=media, span=span, context=ctx)
    label1 = canonicalize_emotion(with_retry(backend, p1, retry_attempts).structured["emotion"])
    label2 = canonicalize_emotion(with_retry(backend, p2, retry_attempts).structured["emotion"])
    return VerificationOutcome(path1=label1, path2=label2, gold=gold)


def annotate_clip(backend: Backend, media: MediaRef, span: TimeSpan,
                  gold: EmotionLabel, clip_id: str, *,
                  max_rounds: int = MAX_ROUNDS, retry_attempts: int = 3,
                  clock: Callable[[], float] = time.time) -> AnnotationResult:
    """Draft-verify loop for one clip: accepted rationale, or a pending
    ReviewItem after max_rounds failed verification rounds.

    Transport failures are retried below the round loop, so they either
    recover invisibly or abort the clip without consuming rounds.
    """
    history: List[RoundRecord] = []
    attempt = 0
    for round_no in range(1, max_rounds + 1):
        attempt += 1
        draft = generate_local_cot(backend, media, span, gold, clip_id,
                                   round_no=round_no, attempt=attempt,
                                   retry_attempts=retry_attempts)
        outcome = dual_path_verify(backend, media, span, draft.text, gold,
                                   attempt=round_no, retry_attempts=retry_attempts)
        history.append(RoundRecord(draft=draft, outcome=outcome))
        if outcome.accepted:
            return AcceptedRationale(clip_id=clip_id, text=draft.text,
                                     rounds_used=round_no, history=tuple(history))
    return ReviewItem(clip_id=clip_id, media=media, span=span, gold_emotion=gold,
                      history=tuple(history), status=ReviewStatus.PENDING,
                      escalated_at=float(clock()))


def build_queries(backend: Backend, media: MediaRef, span: TimeSpan,
                  gold: EmotionLabel, rationale: str, *,
                  retry_attempts: int = 3) -> Tuple[VagueQuery, VagueQuery, VagueQuery]:
    """Generate the three style-tagged vague queries for an accepted clip.

    A payload with the wrong cardinality, duplicate texts, or a missing
    style is regenerated once; a second bad payload raises
    QueryGenerationFailed.
    """
    prompt = render_prompt("query_generate",
                           start_s=f"{span.start_s:g}", end_s=f"{span.end_s:g}",
                           emotion=gold.value, rationale=rationale)
    problem = ""
    for attempt in (1, 2):
        request = BackendRequest(
            task=Task.QUERY_GENERATE, prompt=prompt, media=media, span=span,
            context={"fixture_key": span.key(), "attempt": str(attempt)})
        payload = with_retry(backend, request, retry_attempts).structured
        queries = payload["queries"]
        texts = [q["text"].strip() for q in queries]
        tags = [q["style_tag"] for q in queries]
        if len(queries) != 3:
            problem = f"expected 3 queries, got {len(queries)}"
        elif len(set(texts)) != 3:
            problem = "duplicate query texts"
        elif set(tags) != {s.value for s in QueryStyle}:
            problem = f"style tags must cover all three styles, got {tags}"
        else:
            return tuple(VagueQuery(text=t, style=QueryStyle(tag))  # type: ignore[return-value]
                         for t, tag in zip(texts, tags))
    raise QueryGenerationFailed(f"{problem} (after one regeneration)")


# ---------------------------------------------------------------- stage driver


@dataclass(frozen=True)
class Stage1Clip:
    """One line of a stage-1 file: a labelled span, no rationale yet."""

    media: MediaRef
    clip_id: str
    span: TimeSpan
    emotion: EmotionLabel


def load_stage1(path) -> List[Stage1Clip]:
    clips = []
    seen = set()
    for lineno, obj in jsonl.read_lines(path):
        rid = f"line {lineno}"
        try:
            media = MediaRef(video_id=str(obj["video_id"]), uri=str(obj["media_uri"]),
                             duration_s=float(obj["duration_s"]))
            clip_id = str(obj["clip_id"])
            span = TimeSpan(float(obj["start_s"]), float(obj["end_s"]))
            emotion = canonicalize_emotion(obj["emotion"])
        except KeyError as exc:
            raise ValidationError(rid, f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ValidationError(rid, str(exc)) from exc
        if span.end_s > media.duration_s + 1e-9:
            raise ValidationError(clip_id, "span extends beyond video duration")
        if clip_id in seen:
            raise ValidationError(clip_id, "duplicate clip_id in stage-1 file")
        seen.add(clip_id)
        clips.append(Stage1Clip(media=media, clip_id=clip_id, span=span, emotion=emotion))
    return clips


def annotate_stage(backend: Backend, clips: Sequence[Stage1Clip], *,
                   max_rounds: int = MAX_ROUNDS, retry_attempts: int = 3,
                   clock: Callable[[], float] = time.time,
                   ) -> Tuple[List[DatasetRecord], List[ReviewItem]]:
    """Run the draft-verify-query pipeline over a stage-1 file.

    Accepted clips become corpus records grouped per video; failed clips
    come back as pending review items.
    """
    by_video: Dict[str, Tuple[MediaRef, List[AffectiveClip]]] = {}
    escalated: List[ReviewItem] = []
    for clip in clips:
        vid = clip.media.video_id
        if vid not in by_video:
            by_video[vid] = (clip.media, [])
        result = annotate_clip(backend, clip.media, clip.span, clip.emotion,
                               clip.clip_id, max_rounds=max_rounds,
                               retry_attempts=retry_attempts, clock=clock)
        if isinstance(result, ReviewItem):
            escalated.append(result)
            continue
        queries = build_queries(backend, clip.media, clip.span, clip.emotion,
                                result.text, retry_attempts=retry_attempts)
        by_video[vid][1].append(AffectiveClip(
            clip_id=clip.clip_id, span=clip.span, emotion=clip.emotion,
            rationale=result.text, queries=tuple(q.text for q in queries)))
    records = [DatasetRecord(media=media, clips=tuple(accepted))
               for media, accepted in by_video.values()]
    return records, escalated


# ---------------------------------------------------------------- corrections


Verifier = Callable[["ReviewItem", str], VerificationOutcome]


def apply_correction(item: ReviewItem, rationale: str, emotion_raw: str,
                     reviewer: str, *, verifier: Optional[Verifier] = None,
                     audit: bool = True,
                     clock: Callable[[], float] = time.time) -> ReviewItem:
    """Apply a reviewer's correction to a pending item.

    With auditing on, the corrected rationale must clear the same dual-path
    check; failure leaves the item in the corrected state with the failing
    outcome attached. Items are immutable, so the updated item is returned.
    """
    if item.status is not ReviewStatus.PENDING:
        raise ItemNotPending(f"{item.clip_id}: status is {item.status.value}")
    if not rationale.strip():
        raise ValidationError(item.clip_id, "correction rationale must be non-empty")
    if not reviewer.strip():
        raise ValidationError(item.clip_id, "reviewer must be identified")
    emotion = canonicalize_emotion(emotion_raw)
    correction = Correction(rationale=rationale, emotion=emotion,
                            reviewer=reviewer, at=float(clock()))
    updated = replace(item, status=ReviewStatus.CORRECTED, correction=correction)
    if not audit:
        return replace(updated, status=ReviewStatus.ACCEPTED)
    if verifier is None:
        raise ValueError("auditing a correction requires a verifier")
    outcome = verifier(replace(item, correction=correction), rationale)
    if outcome.path1 is emotion and outcome.path2 is emotion:
        return replace(updated, status=ReviewStatus.ACCEPTED, audit_failure=None)
    return replace(updated, audit_failure=outcome)


def make_verifier(backend: Backend, retry_attempts: int = 3) -> Verifier:
    """Bind the dual-path check to a backend for correction auditing.

    The corrected emotion (not the original gold label) is what both paths
    must agree on, so the outcome's gold field carries it.
    """

    def verify(item: ReviewItem, text: str) -> VerificationOutcome:
        gold = item.correction.emotion if item.correction else item.gold_emotion
        return dual_path_verify(backend, item.media, item.span, text, gold,
                                retry_attempts=retry_attempts)

    return verify


# ---------------------------------------------------------------- serialization


def _outcome_to_dict(o: VerificationOutcome) -> dict:
    return {"path1": o.path1.value, "path2": o.path2.value,
            "gold": o.gold.value, "accepted": o.accepted}


def _outcome_from_dict(d: dict) -> VerificationOutcome:
    return VerificationOutcome(path1=canonicalize_emotion(d["path1"]),
                               path2=canonicalize_emotion(d["path2"]),
                               gold=canonicalize_emotion(d["gold"]))


def review_item_to_dict(item: ReviewItem) -> dict:
    return {
        "clip_id": item.clip_id,
        "video_id": item.media.video_id,
        "media_uri": item.media.uri,
        "duration_s": item.media.duration_s,
        "start_s": item.span.start_s,
        "end_s": item.span.end_s,
        "gold_emotion": item.gold_emotion.value,
        "status": item.status.value,
        "escalated_at": item.escalated_at,
        "history": [
            {
                "round": r.draft.round,
                "text": r.draft.text,
                "sources_present": list(r.draft.sources_present),
                "outcome": _outcome_to_dict(r.outcome),
            }
            for r in item.history
        ],
        "correction": None if item.correction is None else {
            "rationale": item.correction.rationale,
            "emotion": item.correction.emotion.value,
            "reviewer": item.correction.reviewer,
            "at": item.correction.at,
        },
        "audit_failure": None if item.audit_failure is None
        else _outcome_to_dict(item.audit_failure),
    }


def review_item_from_dict(d: dict) -> ReviewItem:
    media = MediaRef(video_id=d["video_id"], uri=d["media_uri"],
                     duration_s=float(d["duration_s"]))
    span = TimeSpan(float(d["start_s"]), float(d["end_s"]))
    history = tuple(
        RoundRecord(
            draft=CotDraft(clip_id=d["clip_id"], text=r["text"],
                           sources_present=tuple(r["sources_present"]),
                           round=int(r["round"])),
            outcome=_outcome_from_dict(r["outcome"]),
        )
        for r in d.get("history", [])
    )
    correction = None
    if d.get("correction"):
        c = d["correction"]
        correction = Correction(rationale=c["rationale"],
                                emotion=canonicalize_emotion(c["emotion"]),
                                reviewer=c["reviewer"], at=float(c["at"]))
    audit_failure = None
    if d.get("audit_failure"):
        audit_failure = _outcome_from_dict(d["audit_failure"])
    return ReviewItem(
        clip_id=d["clip_id"], media=media, span=span,
        gold_emotion=canonicalize_emotion(d["gold_emotion"]),
        history=history, status=ReviewStatus(d["status"]),
        escalated_at=float(d.get("escalated_at", 0.0)),
        correction=correction, audit_failure=audit_failure,
    )


# ---------------------------------------------------------------- review queue


class ReviewQueue:
    """Escalated clips awaiting human correction, backed by an append-only
    JSONL event log. State is rebuilt by replaying the log, so a restart
    (or a second reader) sees exactly what was recorded. Writes are
    serialized by a lock: last-write-wins is never silent, a second submit
    for the same clip fails with ItemNotPending.
    """

    def __init__(self, log_path, clock: Callable[[], float] = time.time):
        self._path = Path(log_path)
        self._clock = clock
        self._lock = threading.Lock()
        self._items: Dict[str, ReviewItem] = {}
        if self._path.exists():
            self._replay()

    def _replay(self) -> None:
        for lineno, event in jsonl.read_lines(self._path):
            kind = event.get("event")
            if kind == "escalated":
                item = review_item_from_dict(event["item"])
                self._items[item.clip_id] = item
            elif kind in ("corrected", "accepted"):
                clip_id = event["clip_id"]
                if clip_id not in self._items:
                    raise ValidationError(clip_id, f"{kind} event for unknown item")
                self._items[clip_id] = review_item_from_dict(event["item"])
            else:
                raise ValidationError(f"line {lineno}", f"unknown event {kind!r}")

    def _append(self, event: dict) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(jsonl.dumps(event))
            fh.write("\n")

    # -- reads

    def items(self, status: Optional[ReviewStatus] = None) -> List[ReviewItem]:
        out = [i for i in self._items.values()
               if status is None or i.status is status]
        return sorted(out, key=lambda i: (i.escalated_at, i.clip_id))

    def page(self, status: Optional[ReviewStatus] = None, page: int = 1,
             page_size: int = 20) -> Tuple[List[ReviewItem], int]:
        if page < 1 or page_size < 1:
            raise ValidationError("<page>", "page and page_size must be positive")
        matching = self.items(status)
        lo = (page - 1) * page_size
        return matching[lo:lo + page_size], len(matching)

    def get(self, clip_id: str) -> ReviewItem:
        try:
            return self._items[clip_id]
        except KeyError:
            raise NotFound(f"no review item for clip {clip_id!r}") from None

    # -- writes

    def escalate(self, item: ReviewItem) -> None:
        with self._lock:
            if item.clip_id in self._items:
                raise ValidationError(item.clip_id, "already escalated")
            self._append({"event": "escalated", "at": float(self._clock()),
                          "item": review_item_to_dict(item)})
            self._items[item.clip_id] = item

    def submit(self, clip_id: str, rationale: str, emotion_raw: str, reviewer: str,
               *, verifier: Optional[Verifier] = None, audit: bool = True) -> ReviewItem:
        with self._lock:
            item = self.get(clip_id)
            updated = apply_correction(item, rationale, emotion_raw, reviewer,
                                       verifier=verifier, audit=audit,
                                       clock=self._clock)
            event = "accepted" if updated.status is ReviewStatus.ACCEPTED else "corrected"
            self._append({"event": event, "at": float(self._clock()),
                          "clip_id": clip_id, "item": review_item_to_dict(updated)})
            self._items[clip_id] = updated
            return updated
