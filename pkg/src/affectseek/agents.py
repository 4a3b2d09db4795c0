"""The session engine: localize, refine, verify, merge, summarize, reflect.

One session answers one vague query over one video. The orchestration is a
deterministic state machine; all model judgement lives behind the backend.
Every backend invocation (and every reflection pass) is recorded as exactly
one history step, and a step budget plus per-stage round budgets bound the
whole session.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .backends.base import Backend, BackendRequest, Task, with_retry
from .domain import (
    AgentAnswer,
    EmotionLabel,
    EvidenceItem,
    EvidenceKind,
    HistoryStep,
    MediaRef,
    ReflectionVerdict,
    SessionHistory,
    TimeSpan,
    VagueQuery,
    VerifiedCandidate,
    canonicalize_emotion,
)
from .errors import BudgetExhausted, EmptyPrediction
from .prompts import render_prompt
from .reflection import RECOVERY_STAGE, RuleBasedChecker, gamma_category


@dataclass(frozen=True)
class OrchestrationConfig:
    """Knobs of the session engine. Defaults favour short, bounded sessions."""

    tau: float = 0.5                # relevance threshold for keeping a verified span
    merge_gap_s: float = 1.0        # retained spans closer than this merge
    max_steps: int = 12             # hard ceiling on recorded steps per session
    max_localize_rounds: int = 2    # coarse localization attempts before giving up
    max_reflect_rounds: int = 2     # recovery re-runs after a non-credible verdict
    max_coarse_spans: int = 4
    retry_attempts: int = 3         # transport/parse retries per backend call

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.merge_gap_s < 0:
            raise ValueError("merge_gap_s must be non-negative")
        for name in ("max_steps", "max_localize_rounds", "max_reflect_rounds",
                     "max_coarse_spans", "retry_attempts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


class SessionPhase(str, Enum):
    INIT = "init"
    LOCALIZED = "localized"
    REFINED = "refined"
    VERIFIED = "verified"
    MERGED = "merged"
    SUMMARIZED = "summarized"
    REFLECTED = "reflected"
    FINAL = "final"
    FAILED = "failed"


@dataclass
class SessionState:
    """Engine-internal working state; surfaces in BudgetExhausted for debugging."""

    query: VagueQuery
    media: MediaRef
    phase: SessionPhase = SessionPhase.INIT
    coarse: List[TimeSpan] = field(default_factory=list)
    refined: List[TimeSpan] = field(default_factory=list)
    verified: List[VerifiedCandidate] = field(default_factory=list)
    merged: List[TimeSpan] = field(default_factory=list)
    answer: Optional[AgentAnswer] = None
    history: SessionHistory = SessionHistory()


@dataclass(frozen=True)
class SessionResult:
    answer: AgentAnswer
    history: SessionHistory
    flags: Tuple[str, ...] = ()
    localize_rounds: int = 1
    reflect_rounds: int = 0


def logical_clock() -> Callable[[], float]:
    """A timestamp source that counts steps instead of reading the wall clock,
    for byte-identical replays."""
    counter = {"t": 0}

    def tick() -> float:
        counter["t"] += 1
        return float(counter["t"])

    return tick


# ---------------------------------------------------------------- pure pieces


def merge_candidates(candidates: Sequence[VerifiedCandidate], tau: float,
                     merge_gap_s: float = 1.0) -> List[TimeSpan]:
    """Keep candidates with alpha >= tau and merge retained spans that
    overlap or sit within merge_gap_s of each other. Pure; returns disjoint
    spans sorted by start time."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if merge_gap_s < 0:
        raise ValueError("merge_gap_s must be non-negative")
    retained = sorted((c.span for c in candidates if c.alpha >= tau),
                      key=lambda s: (s.start_s, s.end_s))
    merged: List[TimeSpan] = []
    for span in retained:
        if merged and span.start_s <= merged[-1].end_s + merge_gap_s:
            last = merged[-1]
            if span.end_s > last.end_s:
                merged[-1] = TimeSpan(last.start_s, span.end_s)
        else:
            merged.append(span)
    return merged


def select_top1(retained: Sequence[VerifiedCandidate],
                merged: Sequence[TimeSpan]) -> Tuple[VerifiedCandidate, TimeSpan]:
    """Pick the best retained candidate and the merged region containing it.

    Ordering: highest alpha, then lowest uncertainty, then earliest start.
    Raises EmptyPrediction when there is nothing to pick from.
    """
    if not retained or not merged:
        raise EmptyPrediction("no retained interval to select from")
    winner = min(retained, key=lambda c: (-c.alpha, c.uncertainty, c.span.start_s))
    for region in merged:
        if region.contains(winner.span):
            return winner, region
    # overlap, not containment, can happen if callers pass foreign spans
    for region in merged:
        if region.overlaps(winner.span):
            return winner, region
    raise EmptyPrediction("selected candidate lies outside every merged region")


def _fmt_spans(spans: Sequence[TimeSpan]) -> str:
    return "[" + ", ".join(s.key() for s in spans) + "]"


_EVIDENCE_KIND = {k.value: k for k in EvidenceKind}


# ---------------------------------------------------------------- the engine


class _Session:
    def __init__(self, backend: Backend, media: MediaRef, query: VagueQuery,
                 config: OrchestrationConfig, checker, clock: Callable[[], float]):
        self.backend = backend
        self.media = media
        self.query = query
        self.cfg = config
        self.checker = checker
        self.clock = clock
        self.state = SessionState(query=query, media=media)
        self.steps: List[HistoryStep] = []
        self._attempts: Dict[Tuple[str, str], int] = {}
        self.localize_rounds = 0
        self.reflect_rounds = 0

    # -- bookkeeping

    def history(self) -> SessionHistory:
        return SessionHistory(tuple(self.steps))

    def _fail(self, detail: str) -> None:
        self.state.phase = SessionPhase.FAILED
        self.state.history = self.history()
        raise BudgetExhausted(detail, state=self.state)

    def _guard(self) -> None:
        if len(self.steps) >= self.cfg.max_steps:
            self._fail(f"step budget of {self.cfg.max_steps} exhausted")

    def _record(self, stage: str, tool: str, input_digest: str, output_digest: str) -> None:
        self.steps.append(HistoryStep(
            index=len(self.steps), stage=stage, tool=tool,
            input_digest=input_digest, output_digest=output_digest,
            timestamp=float(self.clock()),
        ))

    def _next_attempt(self, stage: str, key: str = "") -> int:
        k = (stage, key)
        self._attempts[k] = self._attempts.get(k, 0) + 1
        return self._attempts[k]

    def _invoke(self, task: Task, prompt: str, span: Optional[TimeSpan],
                context: Dict[str, str]) -> dict:
        request = BackendRequest(task=task, prompt=prompt, media=self.media,
                                 span=span, context=context)
        return with_retry(self.backend, request, self.cfg.retry_attempts).structured

    # -- stages

    def localize(self) -> List[TimeSpan]:
        self._guard()
        attempt = self._next_attempt("localize")
        prompt = render_prompt("coarse_localize", query=self.query.text,
                               duration_s=f"{self.media.duration_s:g}",
                               max_spans=str(self.cfg.max_coarse_spans))
        payload = self._invoke(Task.COARSE_LOCALIZE, prompt, None,
                               {"query": self.query.text, "attempt": str(attempt)})
        spans = self._clamp_spans(payload["spans"])
        spans = spans[: self.cfg.max_coarse_spans]
        self._record("localize", "coarse_localize",
                     f"query={self.query.text[:60]!r}", f"spans={_fmt_spans(spans)}")
        self.state.coarse = spans
        self.state.phase = SessionPhase.LOCALIZED
        return spans

    def refine(self, coarse: Sequence[TimeSpan]) -> List[TimeSpan]:
        self._guard()
        attempt = self._next_attempt("refine")
        prompt = render_prompt("refine", query=self.query.text,
                               windows=_fmt_spans(coarse),
                               duration_s=f"{self.media.duration_s:g}")
        payload = self._invoke(Task.REFINE, prompt, None,
                               {"query": self.query.text, "attempt": str(attempt)})
        clamped = self._clamp_spans(payload["spans"])
        kept, dropped = [], []
        for span in clamped:
            if any(span.overlaps(c) for c in coarse):
                kept.append(span)
            else:
                dropped.append(span)
        self._record("refine", "refine", f"coarse={_fmt_spans(coarse)}",
                     f"kept={_fmt_spans(kept)};dropped={_fmt_spans(dropped)}")
        self.state.refined = kept
        self.state.phase = SessionPhase.REFINED
        return kept

    def verify(self, span: TimeSpan) -> VerifiedCandidate:
        self._guard()
        attempt = self._next_attempt("verify", span.key())
        prompt = render_prompt("verify", query=self.query.text,
                               start_s=f"{span.start_s:g}", end_s=f"{span.end_s:g}")
        payload = self._invoke(Task.VERIFY, prompt, span,
                               {"query": self.query.text, "attempt": str(attempt)})
        candidate = VerifiedCandidate(span=span, alpha=payload["alpha"],
                                      visual_evidence=payload["visual_evidence"],
                                      uncertainty=payload["uncertainty"])
        self._record("verify", "verify", f"span={span.key()}",
                     f"alpha={candidate.alpha:g};uncertainty={candidate.uncertainty:g}")
        return candidate

    def summarize(self, final_span: TimeSpan,
                  retained: Sequence[VerifiedCandidate]) -> AgentAnswer:
        self._guard()
        attempt = self._next_attempt("summarize")
        observations = "\n".join(
            f"- [{c.span.key()}] alpha={c.alpha:g}: {c.visual_evidence or 'verified match'}"
            for c in retained) or "(none)"
        prompt = render_prompt(
            "summarize_classify", query=self.query.text,
            start_s=f"{final_span.start_s:g}", end_s=f"{final_span.end_s:g}",
            observations=observations,
            emotions=", ".join(e.value for e in EmotionLabel))
        payload = self._invoke(Task.SUMMARIZE_CLASSIFY, prompt, final_span,
                               {"query": self.query.text, "attempt": str(attempt)})
        evidence: List[EvidenceItem] = []
        for item in payload["evidence"]:
            span = None
            if "start_s" in item:
                span = TimeSpan(item["start_s"], item["end_s"])
            evidence.append(EvidenceItem(kind=_EVIDENCE_KIND[item["kind"]],
                                         payload=item["payload"], span=span,
                                         source_stage="summary"))
        # carry forward what verification actually saw inside the answer region
        for c in retained:
            if c.span.overlaps(final_span):
                evidence.append(EvidenceItem(
                    kind=EvidenceKind.SPAN,
                    payload=c.visual_evidence or f"verified segment {c.span.key()}",
                    span=c.span, source_stage="verify"))
        answer = AgentAnswer(span=final_span,
                             emotion=canonicalize_emotion(payload["emotion"]),
                             rationale=payload["rationale"],
                             evidence=tuple(evidence))
        self._record("summarize", "summarize_classify",
                     f"span={final_span.key()};candidates={len(retained)}",
                     f"emotion={answer.emotion.value};evidence={len(evidence)}")
        self.state.answer = answer
        self.state.phase = SessionPhase.SUMMARIZED
        return answer

    def reflect(self, answer: AgentAnswer) -> ReflectionVerdict:
        self._guard()
        before = len(self.steps)
        verdict = self.checker.review(self.history(), self.query, answer)
        self._record("reflect", getattr(self.checker, "tool", "reflect"),
                     f"steps={before}",
                     f"credible={verdict.credible};gamma={verdict.gamma[:80]}")
        self.state.phase = SessionPhase.REFLECTED
        return verdict

    def _clamp_spans(self, raw: Sequence[dict]) -> List[TimeSpan]:
        spans = []
        for s in raw:
            span = TimeSpan(max(s["start_s"], 0.0), s["end_s"]).clamped(self.media.duration_s)
            if span is not None:
                spans.append(span)
        return spans

    # -- orchestration

    def _localize_cycle(self) -> bool:
        """One localize -> refine -> verify -> merge pass. True when at least
        one merged region survives."""
        self.localize_rounds += 1
        coarse = self.localize()
        if not coarse:
            return False
        refined = self.refine(coarse)
        if not refined:
            return False
        verified = [self.verify(span) for span in refined]
        self.state.verified = verified
        self.state.phase = SessionPhase.VERIFIED
        self.state.merged = merge_candidates(verified, self.cfg.tau, self.cfg.merge_gap_s)
        if self.state.merged:
            self.state.phase = SessionPhase.MERGED
        return bool(self.state.merged)

    def retained(self) -> List[VerifiedCandidate]:
        return [c for c in self.state.verified if c.alpha >= self.cfg.tau]

    def run(self) -> SessionResult:
        for _ in range(self.cfg.max_localize_rounds):
            if self._localize_cycle():
                break
        else:
            self._fail(f"no verified interval after {self.cfg.max_localize_rounds} "
                       "localization round(s)")

        _, final_span = select_top1(self.retained(), self.state.merged)
        answer = self.summarize(final_span, self.retained())
        verdict = self.reflect(answer)

        flags: List[str] = []
        try:
            while not verdict.credible and self.reflect_rounds < self.cfg.max_reflect_rounds:
                self.reflect_rounds += 1
                category = gamma_category(verdict.gamma)
                stage = RECOVERY_STAGE.get(category, "summarize")
                if stage == "localize":
                    if self._localize_cycle():
                        _, final_span = select_top1(self.retained(), self.state.merged)
                elif stage == "verify" and self.state.refined:
                    verified = [self.verify(span) for span in self.state.refined]
                    self.state.verified = verified
                    merged = merge_candidates(verified, self.cfg.tau, self.cfg.merge_gap_s)
                    if merged:
                        self.state.merged = merged
                        _, final_span = select_top1(self.retained(), merged)
                answer = self.summarize(final_span, self.retained())
                verdict = self.reflect(answer)
        except BudgetExhausted:
            # an answer exists; running dry mid-recovery downgrades it
            # instead of discarding it
            flags.append("low_confidence")
            self.state.phase = SessionPhase.FINAL
            return SessionResult(answer=answer, history=self.history(),
                                 flags=tuple(flags),
                                 localize_rounds=self.localize_rounds,
                                 reflect_rounds=self.reflect_rounds)

        if not verdict.credible:
            flags.append("low_confidence")
        self.state.phase = SessionPhase.FINAL
        return SessionResult(answer=answer, history=self.history(), flags=tuple(flags),
                             localize_rounds=self.localize_rounds,
                             reflect_rounds=self.reflect_rounds)


def run_session(backend: Backend, media: MediaRef, query: VagueQuery,
                config: Optional[OrchestrationConfig] = None,
                checker=None,
                clock: Callable[[], float] = time.time) -> SessionResult:
    """Answer one vague query over one video.

    Raises BudgetExhausted (with the failed state attached) when no answer
    could be produced within the configured budgets; a degraded-but-present
    answer is returned with a low_confidence flag instead.
    """
    cfg = config or OrchestrationConfig()
    engine = _Session(backend, media, query, cfg,
                      checker if checker is not None else RuleBasedChecker(), clock)
    return engine.run()


def prediction_row(pair_id: str, result: SessionResult) -> dict:
    """Serialize a session result as one prediction-file line."""
    return {
        "pair_id": pair_id,
        "pred_start_s": result.answer.span.start_s,
        "pred_end_s": result.answer.span.end_s,
        "pred_emotion": result.answer.emotion.value,
        "pred_rationale": result.answer.rationale,
        "flags": list(result.flags),
        "trace": [s.to_dict() for s in result.history.steps],
    }


def failure_row(pair_id: str, error: BudgetExhausted) -> dict:
    """Prediction-file line for a session that could not produce an answer."""
    state = error.state
    trace = [s.to_dict() for s in state.history.steps] if state is not None else []
    return {
        "pair_id": pair_id,
        "pred_rationale": "",
        "flags": ["budget_exhausted"],
        "trace": trace,
    }
