"""Credibility checking of a finished answer against its execution history.

Two interchangeable checkers: a deterministic rule-based one (the default,
and the one replay tests rely on) and a model-backed one that delegates the
same five checks to a reflect-task prompt. Both yield a ReflectionVerdict
whose gamma string is "<category>: <detail>", and categories map onto the
stage the engine should re-run to recover.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional

from .backends.base import Backend, BackendRequest, Task, with_retry
from .domain import (
    AgentAnswer,
    EvidenceKind,
    ReflectionVerdict,
    SessionHistory,
    VagueQuery,
)
from .errors import MalformedModelOutput
from .prompts import render_prompt


class GammaCategory(str, Enum):
    MISSING_LOCALIZATION = "missing-localization"
    MISSING_EVIDENCE = "missing-evidence"
    INCONSISTENCY = "inconsistency"
    INSUFFICIENT_SUPPORT = "insufficient-support"
    FABRICATION = "fabrication"


# Which stage a failed check sends the engine back to.
RECOVERY_STAGE = {
    GammaCategory.MISSING_LOCALIZATION: "localize",
    GammaCategory.MISSING_EVIDENCE: "verify",
    GammaCategory.INSUFFICIENT_SUPPORT: "verify",
    GammaCategory.INCONSISTENCY: "summarize",
    GammaCategory.FABRICATION: "summarize",
}


def gamma_category(gamma: str) -> Optional[GammaCategory]:
    """Parse the category prefix out of a gamma string; None when absent."""
    head = gamma.split(":", 1)[0].strip().lower()
    try:
        return GammaCategory(head)
    except ValueError:
        return None


def _verdict(category: GammaCategory, detail: str) -> ReflectionVerdict:
    return ReflectionVerdict(credible=False, gamma=f"{category.value}: {detail}")


class RuleBasedChecker:
    """Deterministic audit of (history, answer). Checks run in a fixed order
    and the first failure wins:

    1. invocation appropriateness: localization must have run, and before
       any verification;
    2. information completeness: verification and summarization must both
       have run;
    3. intermediate/final consistency: when emotion evidence exists, at
       least one item must actually mention the answered emotion;
    4. evidence sufficiency: the answer needs both span and emotion evidence;
    5. fabrication: span evidence must overlap the answered segment.
    """

    tool = "rule_check"

    def review(self, history: SessionHistory, query: VagueQuery,
               answer: AgentAnswer) -> ReflectionVerdict:
        stages = history.stages()
        if "localize" not in stages:
            return _verdict(GammaCategory.MISSING_LOCALIZATION,
                            "no temporal localization step in the history")
        if "verify" in stages and stages.index("verify") < stages.index("localize"):
            return _verdict(GammaCategory.MISSING_LOCALIZATION,
                            "verification ran before any localization")
        if "verify" not in stages:
            return _verdict(GammaCategory.MISSING_EVIDENCE, "missing clip-level evidence")
        if "summarize" not in stages:
            return _verdict(GammaCategory.MISSING_EVIDENCE, "missing clip summary")

        emotion_items = [e for e in answer.evidence if e.kind is EvidenceKind.EMOTION]
        if emotion_items:
            label = answer.emotion.value.lower()
            if not any(label in e.payload.lower() for e in emotion_items):
                return _verdict(
                    GammaCategory.INCONSISTENCY,
                    f"answer-evidence inconsistency: emotion {answer.emotion.value!r} "
                    "is not grounded in any emotion evidence")

        kinds = {e.kind for e in answer.evidence}
        for needed, what in ((EvidenceKind.SPAN, "span"), (EvidenceKind.EMOTION, "emotion")):
            if needed not in kinds:
                return _verdict(GammaCategory.INSUFFICIENT_SUPPORT,
                                f"answer carries no {what} evidence")

        for e in answer.evidence:
            if e.kind is EvidenceKind.SPAN and e.span is not None:
                if not e.span.overlaps(answer.span):
                    return _verdict(
                        GammaCategory.FABRICATION,
                        f"span evidence {e.span.key()} lies outside the answered "
                        f"segment {answer.span.key()}")

        return ReflectionVerdict(credible=True)


class ModelChecker:
    """Delegates the audit to the reflect backend task."""

    tool = "reflect_model"

    def __init__(self, backend: Backend, max_attempts: int = 3):
        self._backend = backend
        self._max_attempts = max_attempts

    def review(self, history: SessionHistory, query: VagueQuery,
               answer: AgentAnswer) -> ReflectionVerdict:
        evidence = "\n".join(
            f"- {e.kind.value}{f' [{e.span.key()}]' if e.span else ''}: {e.payload}"
            for e in answer.evidence) or "(none)"
        trail = "\n".join(f"{s.index}. {s.stage}: {s.output_digest}"
                          for s in history.steps) or "(empty)"
        prompt = render_prompt(
            "reflect",
            query=query.text,
            start_s=f"{answer.span.start_s:g}",
            end_s=f"{answer.span.end_s:g}",
            emotion=answer.emotion.value,
            rationale=answer.rationale,
            evidence=evidence,
            history=trail,
        )
        request = BackendRequest(task=Task.REFLECT, prompt=prompt,
                                 context={"query": query.text})
        response = with_retry(self._backend, request, self._max_attempts)
        payload = response.structured
        try:
            return ReflectionVerdict(credible=payload["credible"], gamma=payload["gamma"])
        except ValueError as exc:
            raise MalformedModelOutput(str(exc), raw=response.raw) from exc
