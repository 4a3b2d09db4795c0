"""Corpus loading, validation, splitting, statistics, and flattening.

The corpus file is JSONL, one video per line with its annotated clips.
Splits are assigned at the whole-video level so clips from one video can
never straddle train/val/test. Flattening expands each clip into one
evaluation pair per query.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import jsonl
from .domain import (
    AffectiveClip,
    DatasetRecord,
    EmotionLabel,
    EvalPair,
    MediaRef,
    SplitName,
    TimeSpan,
    VagueQuery,
    canonicalize_emotion,
)
from .errors import BadRatios, UnknownSplit, ValidationError

QUERIES_PER_CLIP = 3


# ---------------------------------------------------------------- loading


def _require(d: dict, key: str, kind, record_id: str):
    if key not in d:
        raise ValidationError(record_id, f"missing field {key!r}")
    value = d[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(record_id, f"field {key!r} must be a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind):
        raise ValidationError(record_id, f"field {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def clip_from_dict(d: dict, record_id: str) -> AffectiveClip:
    clip_id = _require(d, "clip_id", str, record_id)
    rid = f"{record_id}/{clip_id}" if clip_id else record_id
    start = _require(d, "start_s", float, rid)
    end = _require(d, "end_s", float, rid)
    emotion = canonicalize_emotion(_require(d, "emotion", str, rid))
    rationale = _require(d, "rationale", str, rid)
    queries = _require(d, "queries", list, rid)
    if len(queries) != QUERIES_PER_CLIP:
        raise ValidationError(rid, f"expected {QUERIES_PER_CLIP} queries, got {len(queries)}")
    for q in queries:
        if not isinstance(q, str) or not q.strip():
            raise ValidationError(rid, "queries must be non-empty strings")
    if not rationale.strip():
        raise ValidationError(rid, "rationale must be non-empty")
    try:
        span = TimeSpan(start, end)
        return AffectiveClip(clip_id=clip_id, span=span, emotion=emotion,
                             rationale=rationale, queries=tuple(queries))
    except ValueError as exc:
        raise ValidationError(rid, str(exc)) from exc


def record_from_dict(d: dict, record_id: str = "") -> DatasetRecord:
    video_id = _require(d, "video_id", str, record_id or "<record>")
    rid = video_id or record_id
    uri = _require(d, "media_uri", str, rid)
    duration = _require(d, "duration_s", float, rid)
    clips_raw = _require(d, "clips", list, rid)
    try:
        media = MediaRef(video_id=video_id, uri=uri, duration_s=duration)
        clips = tuple(clip_from_dict(c, rid) if isinstance(c, dict)
                      else _raise_not_obj(rid) for c in clips_raw)
        return DatasetRecord(media=media, clips=clips)
    except ValueError as exc:
        raise ValidationError(rid, str(exc)) from exc


def _raise_not_obj(rid: str):
    raise ValidationError(rid, "each clip must be a JSON object")


def record_to_dict(record: DatasetRecord) -> dict:
    return {
        "video_id": record.media.video_id,
        "media_uri": record.media.uri,
        "duration_s": record.media.duration_s,
        "clips": [
            {
                "clip_id": c.clip_id,
                "start_s": c.span.start_s,
                "end_s": c.span.end_s,
                "emotion": c.emotion.value,
                "rationale": c.rationale,
                "queries": list(c.queries),
            }
            for c in record.clips
        ],
    }


def load_corpus(path) -> List[DatasetRecord]:
    """Load and validate a corpus file; duplicate video ids are rejected."""
    records: List[DatasetRecord] = []
    seen: set = set()
    for lineno, obj in jsonl.read_lines(path):
        record = record_from_dict(obj, record_id=f"line {lineno}")
        vid = record.media.video_id
        if vid in seen:
            raise ValidationError(vid, "duplicate video_id in corpus")
        seen.add(vid)
        records.append(record)
    return records


def save_corpus(path, records: Iterable[DatasetRecord]) -> int:
    return jsonl.write_lines(path, (record_to_dict(r) for r in records))


# ---------------------------------------------------------------- splits


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class SplitAssignment:
    """Video-level split assignment plus the parameters that produced it."""

    seed: int
    ratios: Tuple[float, float, float]
    by_video: Dict[str, SplitName]

    def videos_in(self, split: SplitName) -> List[str]:
        return sorted(v for v, s in self.by_video.items() if s is split)

    def counts(self) -> Dict[str, int]:
        out = {s.value: 0 for s in SplitName}
        for s in self.by_video.values():
            out[s.value] += 1
        return out


def validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3:
        raise BadRatios(f"expected 3 ratios (train, val, test), got {len(ratios)}")
    r = tuple(float(x) for x in ratios)
    if any(x < 0 for x in r):
        raise BadRatios(f"ratios must be non-negative, got {r}")
    if abs(sum(r) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got {sum(r)!r}")
    return r  # type: ignore[return-value]


def compute_split(video_ids: Sequence[str], seed: int,
                  ratios: Sequence[float] = (0.5, 0.25, 0.25)) -> SplitAssignment:
    """Deterministic whole-video split.

    Procedure: sort ids lexicographically, shuffle with random.Random(seed),
    then cut val = round_half_up(r_val * n) and test = round_half_up(r_test * n)
    off the tail, leaving the remainder as train. The same (ids, seed, ratios)
    always yields the same assignment regardless of input order.
    """
    r_train, r_val, r_test = validate_ratios(ratios)
    ids = sorted(video_ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("<split>", "duplicate video ids")
    n = len(ids)
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_val = min(_round_half_up(r_val * n), n)
    n_test = min(_round_half_up(r_test * n), n - n_val)
    n_train = n - n_val - n_test
    by_video: Dict[str, SplitName] = {}
    for vid in ids[:n_train]:
        by_video[vid] = SplitName.TRAIN
    for vid in ids[n_train:n_train + n_val]:
        by_video[vid] = SplitName.VAL
    for vid in ids[n_train + n_val:]:
        by_video[vid] = SplitName.TEST
    return SplitAssignment(seed=seed, ratios=(r_train, r_val, r_test), by_video=by_video)


def parse_split_name(raw: str) -> SplitName:
    try:
        return SplitName(raw)
    except ValueError:
        raise UnknownSplit(f"unknown split name: {raw!r}") from None


def save_split(path, assignment: SplitAssignment) -> int:
    header = {"seed": assignment.seed, "ratios": list(assignment.ratios)}
    rows = [{"video_id": v, "split": s.value}
            for v, s in sorted(assignment.by_video.items())]
    return jsonl.write_lines(path, [header] + rows)


def load_split(path) -> SplitAssignment:
    seed: Optional[int] = None
    ratios: Optional[Tuple[float, float, float]] = None
    by_video: Dict[str, SplitName] = {}
    for lineno, obj in jsonl.read_lines(path):
        if "seed" in obj and "video_id" not in obj:
            seed = int(obj["seed"])
            ratios = validate_ratios(obj.get("ratios", (0.5, 0.25, 0.25)))
            continue
        vid = _require(obj, "video_id", str, f"line {lineno}")
        raw = _require(obj, "split", str, vid)
        if vid in by_video:
            raise ValidationError(vid, "duplicate video_id in split file")
        by_video[vid] = parse_split_name(raw)
    if seed is None or ratios is None:
        raise ValidationError("<split>", "split file is missing its header line")
    return SplitAssignment(seed=seed, ratios=ratios, by_video=by_video)


# ---------------------------------------------------------------- statistics


@dataclass(frozen=True)
class StatsBuckets:
    """Histogram bucket edges. Defaults follow the published corpus figures."""

    clip_duration_s: Tuple[float, ...] = (14.30, 16.84, 19.16, 21.96)
    rationale_words: Tuple[float, ...] = (97, 102, 106, 112)
    query_words: Tuple[float, ...] = (21, 23, 25, 27)
    clips_per_video: Tuple[float, ...] = (3, 4, 6, 10)
    video_duration_s: Tuple[float, ...] = (60, 180, 300, 600, 1200)

    def __post_init__(self):
        for name in ("clip_duration_s", "rationale_words", "query_words",
                     "clips_per_video", "video_duration_s"):
            edges = getattr(self, name)
            if not edges or list(edges) != sorted(set(edges)):
                raise ValueError(f"{name}: bucket edges must be strictly increasing")


def _bucket_labels(edges: Sequence[float]) -> List[str]:
    def fmt(x: float) -> str:
        return f"{x:g}"

    labels = [f"<{fmt(edges[0])}"]
    for lo, hi in zip(edges, edges[1:]):
        labels.append(f"[{fmt(lo)}, {fmt(hi)})")
    labels.append(f">={fmt(edges[-1])}")
    return labels


def histogram(values: Iterable[float], edges: Sequence[float]) -> Dict[str, int]:
    """Count values into half-open buckets delimited by edges."""
    labels = _bucket_labels(edges)
    counts = {label: 0 for label in labels}
    for v in values:
        idx = 0
        for e in edges:
            if v >= e:
                idx += 1
            else:
                break
        counts[labels[idx]] += 1
    return counts


def _word_count(text: str) -> int:
    return len(text.split())


@dataclass
class CorpusStats:
    n_videos: int
    n_clips: int
    n_pairs: int
    mean_video_duration_s: float
    mean_clip_duration_s: float
    emotion_counts: Dict[str, int]
    clip_duration_hist: Dict[str, int]
    rationale_words_hist: Dict[str, int]
    query_words_hist: Dict[str, int]
    clips_per_video_hist: Dict[str, int]
    video_duration_hist: Dict[str, int]

    def emotion_shares(self) -> Dict[str, float]:
        if self.n_clips == 0:
            return {k: 0.0 for k in self.emotion_counts}
        return {k: v / self.n_clips for k, v in self.emotion_counts.items()}

    def to_dict(self) -> dict:
        return {
            "n_videos": self.n_videos,
            "n_clips": self.n_clips,
            "n_pairs": self.n_pairs,
            "mean_video_duration_s": self.mean_video_duration_s,
            "mean_clip_duration_s": self.mean_clip_duration_s,
            "emotion_counts": dict(self.emotion_counts),
            "emotion_shares": self.emotion_shares(),
            "histograms": {
                "clip_duration_s": dict(self.clip_duration_hist),
                "rationale_words": dict(self.rationale_words_hist),
                "query_words": dict(self.query_words_hist),
                "clips_per_video": dict(self.clips_per_video_hist),
                "video_duration_s": dict(self.video_duration_hist),
            },
        }


def compute_stats(records: Sequence[DatasetRecord],
                  buckets: StatsBuckets = StatsBuckets()) -> CorpusStats:
    clips = [c for r in records for c in r.clips]
    n_videos = len(records)
    n_clips = len(clips)
    n_pairs = sum(len(c.queries) for c in clips)
    emotion_counts = {e.value: 0 for e in EmotionLabel}
    for c in clips:
        emotion_counts[c.emotion.value] += 1
    video_durations = [r.media.duration_s for r in records]
    clip_durations = [c.span.duration_s for c in clips]
    return CorpusStats(
        n_videos=n_videos,
        n_clips=n_clips,
        n_pairs=n_pairs,
        mean_video_duration_s=(sum(video_durations) / n_videos) if n_videos else 0.0,
        mean_clip_duration_s=(sum(clip_durations) / n_clips) if n_clips else 0.0,
        emotion_counts=emotion_counts,
        clip_duration_hist=histogram(clip_durations, buckets.clip_duration_s),
        rationale_words_hist=histogram((_word_count(c.rationale) for c in clips),
                                       buckets.rationale_words),
        query_words_hist=histogram((_word_count(q) for c in clips for q in c.queries),
                                   buckets.query_words),
        clips_per_video_hist=histogram((len(r.clips) for r in records),
                                       buckets.clips_per_video),
        video_duration_hist=histogram(video_durations, buckets.video_duration_s),
    )


def render_stats(stats: CorpusStats) -> str:
    """Plain-text tables for terminal output."""
    lines = [
        f"videos: {stats.n_videos}   clips: {stats.n_clips}   query pairs: {stats.n_pairs}",
        f"mean video duration: {stats.mean_video_duration_s:.2f}s   "
        f"mean clip duration: {stats.mean_clip_duration_s:.2f}s",
        "",
        "emotion distribution:",
    ]
    shares = stats.emotion_shares()
    for name, count in sorted(stats.emotion_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        lines.append(f"  {name:<14} {count:>6}  {shares[name] * 100:5.1f}%")
    for title, hist in (
        ("clip duration (s)", stats.clip_duration_hist),
        ("rationale length (words)", stats.rationale_words_hist),
        ("query length (words)", stats.query_words_hist),
        ("clips per video", stats.clips_per_video_hist),
        ("video duration (s)", stats.video_duration_hist),
    ):
        lines.append("")
        lines.append(f"{title}:")
        for label, count in hist.items():
            lines.append(f"  {label:<14} {count:>6}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- flattening


def flatten_pairs(records: Sequence[DatasetRecord],
                  assignment: Optional[SplitAssignment] = None,
                  split: Optional[SplitName] = None) -> List[EvalPair]:
    """Expand clips into evaluation pairs, one per query.

    With a split requested, videos absent from the assignment are an error;
    without one, every record is flattened. Pair ids are derived as
    video_id::clip_id::qN so they stay stable across reruns.
    """
    if split is not None and assignment is None:
        raise ValueError("a split filter requires a split assignment")
    pairs: List[EvalPair] = []
    for record in records:
        vid = record.media.video_id
        if assignment is not None:
            if vid not in assignment.by_video:
                raise ValidationError(vid, "video has no split assignment")
            if split is not None and assignment.by_video[vid] is not split:
                continue
        for clip in record.clips:
            for i, q in enumerate(clip.queries):
                pairs.append(EvalPair(
                    pair_id=f"{vid}::{clip.clip_id}::q{i}",
                    video_id=vid,
                    query=VagueQuery(text=q),
                    gt_span=clip.span,
                    gt_emotion=clip.emotion,
                    gt_rationale=clip.rationale,
                ))
    return pairs


def pair_to_dict(pair: EvalPair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "video_id": pair.video_id,
        "query": pair.query.text,
        "gt_start_s": pair.gt_span.start_s,
        "gt_end_s": pair.gt_span.end_s,
        "gt_emotion": pair.gt_emotion.value,
        "gt_rationale": pair.gt_rationale,
    }


def pair_from_dict(d: dict, record_id: str = "<pair>") -> EvalPair:
    pair_id = _require(d, "pair_id", str, record_id)
    rid = pair_id or record_id
    try:
        return EvalPair(
            pair_id=pair_id,
            video_id=_require(d, "video_id", str, rid),
            query=VagueQuery(text=_require(d, "query", str, rid)),
            gt_span=TimeSpan(_require(d, "gt_start_s", float, rid),
                             _require(d, "gt_end_s", float, rid)),
            gt_emotion=canonicalize_emotion(_require(d, "gt_emotion", str, rid)),
            gt_rationale=_require(d, "gt_rationale", str, rid),
        )
    except ValueError as exc:
        raise ValidationError(rid, str(exc)) from exc


def load_pairs(path) -> List[EvalPair]:
    pairs = []
    seen = set()
    for lineno, obj in jsonl.read_lines(path):
        pair = pair_from_dict(obj, record_id=f"line {lineno}")
        if pair.pair_id in seen:
            raise ValidationError(pair.pair_id, "duplicate pair_id")
        seen.add(pair.pair_id)
        pairs.append(pair)
    return pairs


def save_pairs(path, pairs: Iterable[EvalPair]) -> int:
    return jsonl.write_lines(path, (pair_to_dict(p) for p in pairs))
