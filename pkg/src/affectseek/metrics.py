"""Localization and joint metrics over (ground truth, prediction) pairs.

Temporal IoU is the ratio of intersection to union of the two intervals.
Aggregates score a missing prediction as zero overlap and a wrong label,
so partial runs are penalized instead of silently shrinking the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import jsonl
from .domain import EmotionLabel, EvalPair, TimeSpan, canonicalize_emotion
from .errors import (
    DuplicatePrediction,
    EmptyEvaluation,
    UnknownPairId,
    ValidationError,
)

DEFAULT_THRESHOLDS: Tuple[float, ...] = (0.3, 0.5, 0.7)


def tiou(gt: TimeSpan, pred: TimeSpan) -> float:
    """Temporal intersection-over-union of two spans, in [0, 1]."""
    inter = min(gt.end_s, pred.end_s) - max(gt.start_s, pred.start_s)
    if inter <= 0.0:
        return 0.0
    union = max(gt.end_s, pred.end_s) - min(gt.start_s, pred.start_s)
    return inter / union


def _check_tau(tau: float) -> float:
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    return tau


@dataclass(frozen=True)
class Prediction:
    """One line of a prediction file. span/emotion are None when the run
    produced no answer for the pair (e.g. budget exhaustion)."""

    pair_id: str
    span: Optional[TimeSpan]
    emotion: Optional[EmotionLabel]
    rationale: str = ""
    flags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Sample:
    """A matched (ground truth, prediction) pair; prediction may be absent."""

    gt_span: TimeSpan
    gt_emotion: EmotionLabel
    pred_span: Optional[TimeSpan] = None
    pred_emotion: Optional[EmotionLabel] = None

    @property
    def tiou(self) -> float:
        if self.pred_span is None:
            return 0.0
        return tiou(self.gt_span, self.pred_span)

    @property
    def emotion_match(self) -> bool:
        return self.pred_emotion is not None and self.pred_emotion is self.gt_emotion


def _materialize(samples: Iterable[Sample]) -> List[Sample]:
    out = list(samples)
    if not out:
        raise EmptyEvaluation("no samples to evaluate")
    return out


def mean_tiou(samples: Iterable[Sample]) -> float:
    xs = _materialize(samples)
    return sum(s.tiou for s in xs) / len(xs)


def recall_at_1(samples: Iterable[Sample], tau: float) -> float:
    """Fraction of pairs whose single prediction clears the tIoU threshold."""
    _check_tau(tau)
    xs = _materialize(samples)
    return sum(1 for s in xs if s.tiou >= tau) / len(xs)


def emotion_accuracy(samples: Iterable[Sample]) -> float:
    xs = _materialize(samples)
    return sum(1 for s in xs if s.emotion_match) / len(xs)


def joint_at(samples: Iterable[Sample], tau: float) -> float:
    """Fraction of pairs that clear the tIoU threshold AND match the label."""
    _check_tau(tau)
    xs = _materialize(samples)
    return sum(1 for s in xs if s.tiou >= tau and s.emotion_match) / len(xs)


def per_emotion_accuracy(samples: Iterable[Sample]) -> Dict[str, float]:
    """Label accuracy grouped by ground-truth emotion; keys are label values."""
    xs = _materialize(samples)
    totals: Dict[str, int] = {}
    hits: Dict[str, int] = {}
    for s in xs:
        key = s.gt_emotion.value
        totals[key] = totals.get(key, 0) + 1
        if s.emotion_match:
            hits[key] = hits.get(key, 0) + 1
    return {k: hits.get(k, 0) / totals[k] for k in sorted(totals)}


@dataclass
class EvalReport:
    n_samples: int
    n_missing: int
    miou: float
    recall_at: Dict[str, float]
    joint_at: Dict[str, float]
    accuracy: float
    per_emotion: Dict[str, float]
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_missing": self.n_missing,
            "mIoU": self.miou,
            "recall_at_1": dict(self.recall_at),
            "joint_at_1": dict(self.joint_at),
            "emotion_accuracy": self.accuracy,
            "per_emotion_accuracy": dict(self.per_emotion),
            "thresholds": list(self.thresholds),
        }


def evaluate_samples(samples: Iterable[Sample],
                     thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> EvalReport:
    xs = _materialize(samples)
    taus = tuple(_check_tau(t) for t in thresholds)
    return EvalReport(
        n_samples=len(xs),
        n_missing=sum(1 for s in xs if s.pred_span is None),
        miou=mean_tiou(xs),
        recall_at={f"{t:g}": recall_at_1(xs, t) for t in taus},
        joint_at={f"{t:g}": joint_at(xs, t) for t in taus},
        accuracy=emotion_accuracy(xs),
        per_emotion=per_emotion_accuracy(xs),
        thresholds=taus,
    )


# ---------------------------------------------------------------- file plumbing


def prediction_from_dict(d: dict, record_id: str = "<prediction>") -> Prediction:
    if "pair_id" not in d or not isinstance(d["pair_id"], str) or not d["pair_id"]:
        raise ValidationError(record_id, "missing or invalid pair_id")
    pid = d["pair_id"]
    flags = d.get("flags", [])
    if not isinstance(flags, list) or any(not isinstance(f, str) for f in flags):
        raise ValidationError(pid, "flags must be a list of strings")
    has_span = "pred_start_s" in d or "pred_end_s" in d
    if not has_span:
        return Prediction(pair_id=pid, span=None, emotion=None,
                          rationale=str(d.get("pred_rationale", "")), flags=tuple(flags))
    try:
        span = TimeSpan(float(d["pred_start_s"]), float(d["pred_end_s"]))
        emotion = canonicalize_emotion(d["pred_emotion"])
    except KeyError as exc:
        raise ValidationError(pid, f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(pid, str(exc)) from exc
    return Prediction(pair_id=pid, span=span, emotion=emotion,
                      rationale=str(d.get("pred_rationale", "")), flags=tuple(flags))


def load_predictions(path) -> Dict[str, Prediction]:
    preds: Dict[str, Prediction] = {}
    for lineno, obj in jsonl.read_lines(path):
        pred = prediction_from_dict(obj, record_id=f"line {lineno}")
        if pred.pair_id in preds:
            raise DuplicatePrediction(f"pair_id {pred.pair_id!r} appears twice")
        preds[pred.pair_id] = pred
    return preds


def match_predictions(pairs: Sequence[EvalPair],
                      preds: Mapping[str, Prediction]) -> List[Sample]:
    """Align predictions to ground truth by pair_id.

    Unknown prediction ids are an error; ground-truth pairs without a
    prediction become missing samples (scored as zero).
    """
    known = {p.pair_id for p in pairs}
    for pid in preds:
        if pid not in known:
            raise UnknownPairId(f"prediction for unknown pair_id {pid!r}")
    samples = []
    for pair in pairs:
        pred = preds.get(pair.pair_id)
        samples.append(Sample(
            gt_span=pair.gt_span,
            gt_emotion=pair.gt_emotion,
            pred_span=pred.span if pred else None,
            pred_emotion=pred.emotion if pred else None,
        ))
    return samples


def evaluate_run(pairs: Sequence[EvalPair], preds: Mapping[str, Prediction],
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> EvalReport:
    return evaluate_samples(match_predictions(pairs, preds), thresholds)


def render_table(report: EvalReport, score: Optional[float] = None) -> str:
    """One-row results table: mIoU, R@1 and Joint@1 per threshold, accuracy,
    and (when a judge run is supplied) the mean explanation score."""
    taus = [f"{t:g}" for t in report.thresholds]
    headers = ["mIoU"]
    headers += [f"R@1@{t}" for t in taus]
    headers += [f"Joint@{t}" for t in taus]
    headers += ["Acc", "Score"]
    values = [f"{report.miou:.4f}"]
    values += [f"{report.recall_at[t]:.4f}" for t in taus]
    values += [f"{report.joint_at[t]:.4f}" for t in taus]
    values += [f"{report.accuracy:.4f}", f"{score:.2f}" if score is not None else "-"]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    note = ""
    if report.n_missing:
        note = f"\n({report.n_missing}/{report.n_samples} pairs had no prediction and scored 0)"
    return f"{head}\n{row}{note}\n"
