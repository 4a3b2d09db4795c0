"""Shared vocabulary of the pipeline.

Value objects used across corpus handling, the agent engine, metrics, the
judge, and annotation. Everything here is immutable; modules that need to
evolve state (the session engine, the review queue) build on top of these
rather than mutating them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from .errors import DimOutOfRange, UnknownEmotion


class EmotionLabel(str, Enum):
    """The 13 canonical emotion categories. Closed set; see canonicalize_emotion."""

    ANGER = "anger"
    ANTICIPATION = "anticipation"
    DISGUST = "disgust"
    FEAR = "fear"
    HORROR = "horror"
    JOY = "joy"
    LOVE = "love"
    NEUTRAL = "neutral"
    PRIDE = "pride"
    SADNESS = "sadness"
    SATISFACTION = "satisfaction"
    SURPRISE = "surprise"
    TRUST = "trust"


# Deliberately tiny alias table. Unknown strings must fail loudly rather than
# be fuzzily matched: a typo in a label file is data corruption, not a synonym.
_EMOTION_ALIASES = {
    "angry": EmotionLabel.ANGER,
}

_EMOTIONS_BY_VALUE = {e.value: e for e in EmotionLabel}


def canonicalize_emotion(raw: str) -> EmotionLabel:
    """Map a raw label string onto the canonical vocabulary.

    Matching is case-insensitive and tolerant of surrounding whitespace.
    Raises UnknownEmotion for anything outside the 13 labels and the
    alias table; idempotent on its own output.
    """
    if not isinstance(raw, str):
        raise UnknownEmotion(repr(raw))
    key = raw.strip().lower()
    if key in _EMOTIONS_BY_VALUE:
        return _EMOTIONS_BY_VALUE[key]
    if key in _EMOTION_ALIASES:
        return _EMOTION_ALIASES[key]
    raise UnknownEmotion(raw)


class SplitName(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class QueryStyle(str, Enum):
    """The three first-person phrasings a vague query can take."""

    VAGUE_MEMORY = "vague_memory"
    SCENE_IMPRESSION = "scene_impression"
    EMOTIONAL_EXPERIENCE = "emotional_experience"


@dataclass(frozen=True)
class TimeSpan:
    """A half-open-ish time interval [start_s, end_s) in seconds, start < end."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not (isinstance(self.start_s, (int, float)) and isinstance(self.end_s, (int, float))):
            raise ValueError("span endpoints must be numbers")
        if not (self.start_s >= 0.0):
            raise ValueError(f"span start must be >= 0, got {self.start_s}")
        if not (self.start_s < self.end_s):
            raise ValueError(f"span start must precede end, got [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def overlaps(self, other: "TimeSpan") -> bool:
        return self.start_s < other.end_s and other.start_s < self.end_s

    def contains(self, other: "TimeSpan") -> bool:
        return self.start_s <= other.start_s and other.end_s <= self.end_s

    def clamped(self, duration_s: float) -> Optional["TimeSpan"]:
        """Clip to [0, duration_s]; None when nothing is left."""
        lo = max(self.start_s, 0.0)
        hi = min(self.end_s, duration_s)
        if lo >= hi:
            return None
        return TimeSpan(lo, hi)

    def key(self) -> str:
        """Compact stable rendering, used as a fixture key: '8-20'."""
        return f"{self.start_s:g}-{self.end_s:g}"


@dataclass(frozen=True)
class MediaRef:
    """Pointer to a video plus the one piece of metadata everything needs."""

    video_id: str
    uri: str
    duration_s: float

    def __post_init__(self):
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if not (self.duration_s > 0):
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class VagueQuery:
    """A first-person, intentionally underspecified user query."""

    text: str
    style: Optional[QueryStyle] = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass(frozen=True)
class AffectiveClip:
    """One annotated emotional moment inside a video."""

    clip_id: str
    span: TimeSpan
    emotion: EmotionLabel
    rationale: str
    queries: Tuple[str, ...]

    def __post_init__(self):
        if not self.clip_id:
            raise ValueError("clip_id must be non-empty")
        if len(self.queries) != 3:
            raise ValueError(f"{self.clip_id}: a clip carries exactly 3 queries, got {len(self.queries)}")


@dataclass(frozen=True)
class DatasetRecord:
    """A video with its annotated clips, as stored in the corpus file."""

    media: MediaRef
    clips: Tuple[AffectiveClip, ...]

    def __post_init__(self):
        seen = set()
        for clip in self.clips:
            if clip.clip_id in seen:
                raise ValueError(f"{self.media.video_id}: duplicate clip_id {clip.clip_id}")
            seen.add(clip.clip_id)
            if clip.span.end_s > self.media.duration_s + 1e-9:
                raise ValueError(
                    f"{clip.clip_id}: span ends at {clip.span.end_s}s, "
                    f"beyond video duration {self.media.duration_s}s"
                )


@dataclass(frozen=True)
class EvalPair:
    """One (query, ground-truth) row of a flattened evaluation file."""

    pair_id: str
    video_id: str
    query: VagueQuery
    gt_span: TimeSpan
    gt_emotion: EmotionLabel
    gt_rationale: str


class EvidenceKind(str, Enum):
    SPAN = "span_evidence"
    EMOTION = "emotion_evidence"
    KEYFRAME = "keyframe_evidence"


@dataclass(frozen=True)
class EvidenceItem:
    """A grounded fragment backing part of an answer."""

    kind: EvidenceKind
    payload: str
    span: Optional[TimeSpan] = None
    source_stage: str = ""

    def __post_init__(self):
        if not self.payload:
            raise ValueError("evidence payload must be non-empty")


@dataclass(frozen=True)
class VerifiedCandidate:
    """A refined interval after clip-level verification (Perception output)."""

    span: TimeSpan
    alpha: float
    visual_evidence: str
    uncertainty: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (0.0 <= self.uncertainty <= 1.0):
            raise ValueError(f"uncertainty must lie in [0, 1], got {self.uncertainty}")


@dataclass(frozen=True)
class AgentAnswer:
    """The engine's final output for one query."""

    span: TimeSpan
    emotion: EmotionLabel
    rationale: str
    evidence: Tuple[EvidenceItem, ...] = ()

    def __post_init__(self):
        if not self.rationale or not self.rationale.strip():
            raise ValueError("answer rationale must be non-empty")


@dataclass(frozen=True)
class HistoryStep:
    """One recorded engine step. Timestamps may be logical counters."""

    index: int
    stage: str
    tool: str
    input_digest: str
    output_digest: str
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "stage": self.stage,
            "tool": self.tool,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryStep":
        return cls(
            index=int(d["index"]),
            stage=str(d["stage"]),
            tool=str(d["tool"]),
            input_digest=str(d["input_digest"]),
            output_digest=str(d["output_digest"]),
            timestamp=float(d["timestamp"]),
        )


@dataclass(frozen=True)
class SessionHistory:
    """Ordered, append-only record of one session's steps."""

    steps: Tuple[HistoryStep, ...] = ()

    def __post_init__(self):
        for i, step in enumerate(self.steps):
            if step.index != i:
                raise ValueError(f"history step {i} carries index {step.index}")
            if i and step.timestamp < self.steps[i - 1].timestamp:
                raise ValueError(f"history step {i} is older than its predecessor")

    def __len__(self) -> int:
        return len(self.steps)

    def stages(self) -> Tuple[str, ...]:
        return tuple(s.stage for s in self.steps)

    def count(self, stage: str) -> int:
        return sum(1 for s in self.steps if s.stage == stage)


@dataclass(frozen=True)
class ReflectionVerdict:
    """Credibility check outcome: credible XOR a non-empty failure category."""

    credible: bool
    gamma: str = ""

    def __post_init__(self):
        if self.credible and self.gamma:
            raise ValueError("a credible verdict must not carry a failure category")
        if not self.credible and not self.gamma.strip():
            raise ValueError("a non-credible verdict must name its failure category")


class JudgeBand(str, Enum):
    CORRECT = "correct"
    PARTIALLY_CORRECT = "partially_correct"
    INCORRECT = "incorrect"


# The six rubric dimensions, in scoring order.
JUDGE_DIMENSIONS: Tuple[str, ...] = (
    "semantic_consistency",
    "visual_evidence",
    "vocal_prosody",
    "event_content",
    "cinematography",
    "hallucination",
)

_BAND_CORRECT_MIN = 10
_BAND_PARTIAL_MIN = 6


def band_for(total: int, major_hallucination: bool) -> JudgeBand:
    """Band mapping for a six-dimension total in [0, 12].

    A flagged major hallucination forces the incorrect band regardless of
    the numeric total.
    """
    if major_hallucination:
        return JudgeBand.INCORRECT
    if total >= _BAND_CORRECT_MIN:
        return JudgeBand.CORRECT
    if total >= _BAND_PARTIAL_MIN:
        return JudgeBand.PARTIALLY_CORRECT
    return JudgeBand.INCORRECT


@dataclass(frozen=True)
class JudgeScore:
    """A judged explanation: per-dimension scores, their total, and the band."""

    dims: Tuple[int, ...]
    total: int
    band: JudgeBand
    major_hallucination: bool = False
    raw: str = ""

    def __post_init__(self):
        if len(self.dims) != len(JUDGE_DIMENSIONS):
            raise DimOutOfRange(f"expected {len(JUDGE_DIMENSIONS)} dimension scores, got {len(self.dims)}")
        for name, v in zip(JUDGE_DIMENSIONS, self.dims):
            if not isinstance(v, int) or isinstance(v, bool) or v not in (0, 1, 2):
                raise DimOutOfRange(f"{name} score must be one of 0/1/2, got {v!r}")
        if self.total != sum(self.dims):
            raise DimOutOfRange(f"total {self.total} does not equal the dimension sum {sum(self.dims)}")
        if self.band is not band_for(self.total, self.major_hallucination):
            raise DimOutOfRange(f"band {self.band.value} is inconsistent with total {self.total}")
