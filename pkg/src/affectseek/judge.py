"""Explanation grading: six 0/1/2 dimensions, a total, and a band.

The model-backed judge renders the grading rubric and parses the model's
dimension scores; the rule-based judge is a deterministic text-overlap
proxy so runs and tests can be scored hermetically. Both produce
JudgeScore values through the same band mapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

from . import jsonl
from .backends.base import Backend, BackendRequest, Task, with_retry
from .domain import (
    JUDGE_DIMENSIONS,
    EmotionLabel,
    EvalPair,
    JudgeBand,
    JudgeScore,
    band_for,
)
from .errors import DimOutOfRange, EmptyEvaluation
from .metrics import Prediction
from .prompts import render_prompt


def total_and_band(dims: Sequence[int], major_hallucination: bool = False,
                   raw: str = "") -> JudgeScore:
    """Build a validated JudgeScore from six dimension scores.

    Raises DimOutOfRange on wrong arity or scores outside {0, 1, 2}.
    """
    dims_t = tuple(dims)
    total = sum(dims_t) if all(isinstance(v, int) and not isinstance(v, bool) for v in dims_t) else -1
    if total < 0:
        raise DimOutOfRange(f"dimension scores must be integers, got {dims_t!r}")
    return JudgeScore(dims=dims_t, total=total,
                      band=band_for(total, major_hallucination),
                      major_hallucination=major_hallucination, raw=raw)


class JudgeScorer(Protocol):
    def score(self, pair_id: str, gt_emotion: EmotionLabel, gt_rationale: str,
              pred_emotion: EmotionLabel, pred_rationale: str) -> JudgeScore: ...


class ModelJudge:
    """Grades via the judge backend task; the pair id doubles as the
    fixture key so scripted runs stay per-pair addressable."""

    def __init__(self, backend: Backend, max_attempts: int = 3):
        self._backend = backend
        self._max_attempts = max_attempts

    def score(self, pair_id: str, gt_emotion: EmotionLabel, gt_rationale: str,
              pred_emotion: EmotionLabel, pred_rationale: str) -> JudgeScore:
        if not gt_rationale.strip():
            raise ValueError(f"{pair_id}: reference rationale is empty")
        if not pred_rationale.strip():
            raise ValueError(f"{pair_id}: predicted rationale is empty")
        prompt = render_prompt("judge",
                               gt_emotion=gt_emotion.value, gt_rationale=gt_rationale,
                               pred_emotion=pred_emotion.value, pred_rationale=pred_rationale)
        request = BackendRequest(task=Task.JUDGE, prompt=prompt,
                                 context={"fixture_key": pair_id})
        response = with_retry(self._backend, request, self._max_attempts)
        return total_and_band(response.structured["dims"],
                              response.structured["major_hallucination"],
                              raw=response.raw)


# ---------------------------------------------------------------- rule-based proxy

_STOPWORDS = frozenset("""
a an the and or but of to in on at for with as is are was were be been being
this that these those it its his her their our your my i you he she they we
there here when then than so very really just kind sort some any not no
""".split())

_CATEGORY_WORDS: Dict[str, frozenset] = {
    "visual_evidence": frozenset("""
        see seen visible visual scene shot frame light lighting dark bright
        color colours face faces expression expressions blood bloodstain tears
        smile smiling stare staring
    """.split()),
    "vocal_prosody": frozenset("""
        voice voices shout shouting scream screaming whisper whispering tone
        pitch sound sounds silence silent cry crying sob sobbing laugh
        laughter music score
    """.split()),
    "cinematography": frozenset("""
        camera closeup close-up cut cuts cutting editing montage pan panning
        zoom zooming handheld framing angle angles palette grading slow-motion
        tracking
    """.split()),
}


def _words(text: str) -> frozenset:
    tokens = (w.strip(".,;:!?\"'()[]") for w in text.lower().split())
    return frozenset(w for w in tokens if w and w not in _STOPWORDS)


_VALENCE_GROUPS = (
    {EmotionLabel.ANGER, EmotionLabel.DISGUST, EmotionLabel.FEAR,
     EmotionLabel.HORROR, EmotionLabel.SADNESS},
    {EmotionLabel.JOY, EmotionLabel.LOVE, EmotionLabel.PRIDE,
     EmotionLabel.SATISFACTION, EmotionLabel.TRUST},
    {EmotionLabel.ANTICIPATION, EmotionLabel.SURPRISE, EmotionLabel.NEUTRAL},
)


def _same_group(a: EmotionLabel, b: EmotionLabel) -> bool:
    return any(a in g and b in g for g in _VALENCE_GROUPS)


class RuleBasedJudge:
    """Deterministic grading proxy built on word overlap.

    This is a stand-in for offline runs and tests, not a faithful grader:
    per-category keyword mentions in the prediction that the reference never
    makes count as unsupported claims, two or more of which flag a major
    hallucination. Same inputs always give the same score.
    """

    def score(self, pair_id: str, gt_emotion: EmotionLabel, gt_rationale: str,
              pred_emotion: EmotionLabel, pred_rationale: str) -> JudgeScore:
        if not gt_rationale.strip():
            raise ValueError(f"{pair_id}: reference rationale is empty")
        if not pred_rationale.strip():
            raise ValueError(f"{pair_id}: predicted rationale is empty")
        gt_words = _words(gt_rationale)
        pred_words = _words(pred_rationale)

        if pred_emotion is gt_emotion:
            semantic = 2
        elif _same_group(pred_emotion, gt_emotion):
            semantic = 1
        else:
            semantic = 0

        unsupported = 0
        category_scores: Dict[str, int] = {}
        for name, vocab in _CATEGORY_WORDS.items():
            p = pred_words & vocab
            g = gt_words & vocab
            if not p and not g:
                category_scores[name] = 2
            elif p and g and (p & g):
                category_scores[name] = 2
            elif p and g:
                category_scores[name] = 1
            elif g:
                category_scores[name] = 1  # omission, not contradiction
            else:
                category_scores[name] = 0
                unsupported += 1

        union = pred_words | gt_words
        jaccard = len(pred_words & gt_words) / len(union) if union else 0.0
        if jaccard >= 0.3:
            event = 2
        elif jaccard >= 0.1:
            event = 1
        else:
            event = 0

        halluc_dim = 2 - min(2, unsupported)
        dims = (semantic, category_scores["visual_evidence"],
                category_scores["vocal_prosody"], event,
                category_scores["cinematography"], halluc_dim)
        return total_and_band(dims, major_hallucination=unsupported >= 2,
                              raw=f"rule_proxy jaccard={jaccard:.3f} unsupported={unsupported}")


# ---------------------------------------------------------------- runs


@dataclass(frozen=True)
class JudgeResult:
    pair_id: str
    score: JudgeScore

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "dims": list(self.score.dims),
            "total": self.score.total,
            "band": self.score.band.value,
            "hallucination": self.score.major_hallucination,
            "raw": self.score.raw,
        }


@dataclass
class JudgeRun:
    results: List[JudgeResult]
    n_skipped: int

    @property
    def n_judged(self) -> int:
        return len(self.results)

    def mean_total(self) -> float:
        if not self.results:
            raise EmptyEvaluation("no judged predictions")
        return sum(r.score.total for r in self.results) / len(self.results)

    def band_histogram(self) -> Dict[str, int]:
        hist = {band.value: 0 for band in JudgeBand}
        for r in self.results:
            hist[r.score.band.value] += 1
        return hist

    def summary(self) -> dict:
        return {
            "n_judged": self.n_judged,
            "n_skipped": self.n_skipped,
            "mean_total": self.mean_total() if self.results else None,
            "band_histogram": self.band_histogram(),
            "dimensions": list(JUDGE_DIMENSIONS),
        }


def judge_run(pairs: Sequence[EvalPair], preds: Mapping[str, Prediction],
              scorer: JudgeScorer) -> JudgeRun:
    """Grade every pair that has a complete prediction; count the rest as
    skipped rather than failing the whole run."""
    results: List[JudgeResult] = []
    skipped = 0
    for pair in pairs:
        pred = preds.get(pair.pair_id)
        if (pred is None or pred.span is None or pred.emotion is None
                or not pred.rationale.strip()):
            skipped += 1
            continue
        score = scorer.score(pair.pair_id, pair.gt_emotion, pair.gt_rationale,
                             pred.emotion, pred.rationale)
        results.append(JudgeResult(pair_id=pair.pair_id, score=score))
    return JudgeRun(results=results, n_skipped=skipped)


def save_judge_results(path, run: JudgeRun) -> int:
    return jsonl.write_lines(path, (r.to_dict() for r in run.results))
