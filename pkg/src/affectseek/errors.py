"""Exception taxonomy for the affectseek package.

Everything raised on purpose derives from AffectSeekError so callers can
catch the package's failures without also swallowing programming errors.
"""

from __future__ import annotations


class AffectSeekError(Exception):
    """Base class for all deliberate failures raised by this package."""


# ---------------------------------------------------------------- domain


class UnknownEmotion(AffectSeekError):
    """An emotion string is not one of the canonical labels or aliases."""

    def __init__(self, raw: str):
        super().__init__(f"unknown emotion label: {raw!r}")
        self.raw = raw


# ---------------------------------------------------------------- corpus


class ParseError(AffectSeekError):
    """A line of an input file is not valid JSON."""

    def __init__(self, path: str, lineno: int, detail: str):
        super().__init__(f"{path}:{lineno}: {detail}")
        self.path = path
        self.lineno = lineno
        self.detail = detail


class ValidationError(AffectSeekError):
    """A record parsed but violates the schema or an invariant."""

    def __init__(self, record_id: str, reason: str):
        super().__init__(f"{record_id}: {reason}")
        self.record_id = record_id
        self.reason = reason


class BadRatios(AffectSeekError):
    """Split ratios are negative or do not sum to 1."""


class UnknownSplit(AffectSeekError):
    """A split name is not one of train/val/test."""


# ---------------------------------------------------------------- backends


class BackendError(AffectSeekError):
    """Base class for model-backend failures."""


class TransportError(BackendError):
    """The backend could not be reached or returned a transport-level error."""


class BackendTimeout(BackendError):
    """The backend did not answer within the configured timeout."""


class MalformedModelOutput(BackendError):
    """The backend answered, but the payload does not match the task schema."""

    def __init__(self, detail: str, raw: str = ""):
        super().__init__(detail)
        self.raw = raw


class FixtureMiss(BackendError):
    """The scripted backend has no entry for the requested (video, task, key)."""


# ---------------------------------------------------------------- engine


class EmptyPrediction(AffectSeekError):
    """No candidate interval survived verification and merging."""


class BudgetExhausted(AffectSeekError):
    """A session ran out of step or round budget before producing an answer.

    Carries the failed-phase session state so callers can inspect the
    history accumulated up to the failure.
    """

    def __init__(self, detail: str, state=None):
        super().__init__(detail)
        self.state = state


# ---------------------------------------------------------------- metrics


class EmptyEvaluation(AffectSeekError):
    """An aggregate metric was requested over zero samples."""


class UnknownPairId(AffectSeekError):
    """A prediction references a pair_id absent from the ground truth."""


class DuplicatePrediction(AffectSeekError):
    """Two prediction lines carry the same pair_id."""


# ---------------------------------------------------------------- judge


class DimOutOfRange(AffectSeekError):
    """A judge dimension score is outside {0, 1, 2} or the wrong arity."""


# ---------------------------------------------------------------- annotation / review


class QueryGenerationFailed(AffectSeekError):
    """Query generation could not produce three distinct, well-tagged queries."""


class ItemNotPending(AffectSeekError):
    """A correction was submitted for an item that is not awaiting review."""


class NotFound(AffectSeekError):
    """Lookup by id matched nothing."""
