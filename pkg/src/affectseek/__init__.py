"""Agentic localization, classification, and explanation of affective
moments in long videos under vague queries, plus the evaluation harness
and human-in-the-loop annotation tooling built around the same corpus
format."""

__version__ = "0.1.0"

from .domain import (
    AffectiveClip,
    AgentAnswer,
    DatasetRecord,
    EmotionLabel,
    EvalPair,
    EvidenceItem,
    EvidenceKind,
    JudgeBand,
    JudgeScore,
    MediaRef,
    QueryStyle,
    ReflectionVerdict,
    SessionHistory,
    SplitName,
    TimeSpan,
    VagueQuery,
    VerifiedCandidate,
    canonicalize_emotion,
)

__all__ = [
    "__version__",
    "AffectiveClip",
    "AgentAnswer",
    "DatasetRecord",
    "EmotionLabel",
    "EvalPair",
    "EvidenceItem",
    "EvidenceKind",
    "JudgeBand",
    "JudgeScore",
    "MediaRef",
    "QueryStyle",
    "ReflectionVerdict",
    "SessionHistory",
    "SplitName",
    "TimeSpan",
    "VagueQuery",
    "VerifiedCandidate",
    "canonicalize_emotion",
]
