"""Backend-neutral request/response types and per-task payload schemas.

Every model call in the pipeline goes through BackendRequest -> invoke ->
BackendResponse. The payload schema for each task is enforced here, once,
so a scripted fixture and a live endpoint are held to exactly the same
contract and tests exercising one cover the parsing of the other.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Protocol

from ..domain import MediaRef, QueryStyle, TimeSpan, canonicalize_emotion
from ..errors import BackendTimeout, MalformedModelOutput, TransportError, UnknownEmotion


class Task(str, Enum):
    COARSE_LOCALIZE = "coarse_localize"
    REFINE = "refine"
    VERIFY = "verify"
    SUMMARIZE_CLASSIFY = "summarize_classify"
    REFLECT = "reflect"
    COT_GENERATE = "cot_generate"
    EMOTION_FROM_TEXT = "emotion_from_text"
    EMOTION_FROM_TEXT_AND_CLIP = "emotion_from_text_and_clip"
    QUERY_GENERATE = "query_generate"
    JUDGE = "judge"


# Which tasks must carry media, and which must also pin a span on it.
_NEEDS_MEDIA = {
    Task.COARSE_LOCALIZE,
    Task.REFINE,
    Task.VERIFY,
    Task.SUMMARIZE_CLASSIFY,
    Task.COT_GENERATE,
    Task.EMOTION_FROM_TEXT_AND_CLIP,
    Task.QUERY_GENERATE,
}
_NEEDS_SPAN = {
    Task.VERIFY,
    Task.SUMMARIZE_CLASSIFY,
    Task.COT_GENERATE,
    Task.EMOTION_FROM_TEXT_AND_CLIP,
    Task.QUERY_GENERATE,
}


@dataclass(frozen=True)
class BackendRequest:
    """One model invocation: a task, a rendered prompt, optional media focus,
    and a small string-to-string context used for fixture keying and prompts."""

    task: Task
    prompt: str
    media: Optional[MediaRef] = None
    span: Optional[TimeSpan] = None
    context: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class BackendResponse:
    structured: dict
    raw: str = ""
    usage: Dict[str, int] = field(default_factory=dict)


class Backend(Protocol):
    def invoke(self, request: BackendRequest) -> BackendResponse: ...


def validate_request(request: BackendRequest) -> None:
    """Reject requests that are missing the media or span their task needs."""
    if request.task in _NEEDS_MEDIA and request.media is None:
        raise ValueError(f"task {request.task.value} requires a media reference")
    if request.task in _NEEDS_SPAN and request.span is None:
        raise ValueError(f"task {request.task.value} requires a time span")


# ---------------------------------------------------------------- JSON digging


def _strip_fences(text: str) -> str:
    t = text.strip()
    if t.startswith("```"):
        first_nl = t.find("\n")
        if first_nl != -1 and t.rstrip().endswith("```"):
            return t[first_nl + 1: t.rstrip().rfind("```")].strip()
    return t


def extract_json_object(text: str) -> dict:
    """Pull one JSON object out of model text.

    Tries, in order: the whole string, the content of a fenced block, the
    first balanced {...} region. Raises MalformedModelOutput when nothing
    parses to an object.
    """
    for candidate in (text, _strip_fences(text)):
        try:
            obj = json.loads(candidate)
            if isinstance(obj, dict):
                return obj
        except (json.JSONDecodeError, TypeError):
            pass
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        esc = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if esc:
                    esc = False
                elif ch == "\\":
                    esc = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start: i + 1])
                        if isinstance(obj, dict):
                            return obj
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    raise MalformedModelOutput("no JSON object found in model output", raw=text)


# ---------------------------------------------------------------- schemas


def _bad(task: Task, detail: str, payload) -> MalformedModelOutput:
    raw = payload if isinstance(payload, str) else json.dumps(payload, default=str)
    return MalformedModelOutput(f"{task.value}: {detail}", raw=raw)


def _as_number(task: Task, payload: dict, key: str, lo=None, hi=None) -> float:
    v = payload.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _bad(task, f"field {key!r} must be a number", payload)
    v = float(v)
    if lo is not None and not (lo <= v <= hi):
        raise _bad(task, f"field {key!r} must lie in [{lo}, {hi}], got {v}", payload)
    return v


def _as_str(task: Task, payload: dict, key: str, required: bool = True, default: str = "") -> str:
    v = payload.get(key, default)
    if not isinstance(v, str):
        raise _bad(task, f"field {key!r} must be a string", payload)
    if required and not v.strip():
        raise _bad(task, f"field {key!r} must be non-empty", payload)
    return v


def _parse_spans(task: Task, payload: dict) -> dict:
    spans = payload.get("spans")
    if not isinstance(spans, list):
        raise _bad(task, "field 'spans' must be a list", payload)
    out = []
    for s in spans:
        if not isinstance(s, dict):
            raise _bad(task, "each span must be an object", payload)
        start = _as_number(task, s, "start_s")
        end = _as_number(task, s, "end_s")
        if start >= end:
            raise _bad(task, f"span start {start} must precede end {end}", payload)
        out.append({"start_s": start, "end_s": end})
    return {"spans": out}


def _parse_verify(task: Task, payload: dict) -> dict:
    return {
        "alpha": _as_number(task, payload, "alpha", 0.0, 1.0),
        "visual_evidence": _as_str(task, payload, "visual_evidence", required=False),
        "uncertainty": _as_number(task, payload, "uncertainty", 0.0, 1.0),
        "rationale": _as_str(task, payload, "rationale", required=False),
    }


def _parse_emotion(task: Task, payload: dict, key: str = "emotion") -> str:
    raw = _as_str(task, payload, key)
    try:
        return canonicalize_emotion(raw).value
    except UnknownEmotion as exc:
        raise _bad(task, f"unknown emotion label {raw!r}", payload) from exc


_EVIDENCE_KINDS = {"span_evidence", "emotion_evidence", "keyframe_evidence"}


def _parse_summarize(task: Task, payload: dict) -> dict:
    evidence = payload.get("evidence", [])
    if not isinstance(evidence, list):
        raise _bad(task, "field 'evidence' must be a list", payload)
    items = []
    for item in evidence:
        if not isinstance(item, dict):
            raise _bad(task, "each evidence item must be an object", payload)
        kind = _as_str(task, item, "kind")
        if kind not in _EVIDENCE_KINDS:
            raise _bad(task, f"unknown evidence kind {kind!r}", payload)
        out = {"kind": kind, "payload": _as_str(task, item, "payload")}
        if "start_s" in item or "end_s" in item:
            start = _as_number(task, item, "start_s")
            end = _as_number(task, item, "end_s")
            if start >= end:
                raise _bad(task, "evidence span start must precede end", payload)
            out["start_s"], out["end_s"] = start, end
        items.append(out)
    return {
        "emotion": _parse_emotion(task, payload),
        "rationale": _as_str(task, payload, "rationale"),
        "evidence": items,
    }


def _parse_reflect(task: Task, payload: dict) -> dict:
    credible = payload.get("credible")
    if not isinstance(credible, bool):
        raise _bad(task, "field 'credible' must be a boolean", payload)
    gamma = _as_str(task, payload, "gamma", required=False)
    if not credible and not gamma.strip():
        raise _bad(task, "a non-credible verdict must name its failure category", payload)
    if credible:
        gamma = ""
    return {"credible": credible, "gamma": gamma}


_STYLE_TAGS = {s.value for s in QueryStyle}


def _parse_queries(task: Task, payload: dict) -> dict:
    queries = payload.get("queries")
    if not isinstance(queries, list):
        raise _bad(task, "field 'queries' must be a list", payload)
    out = []
    for q in queries:
        if not isinstance(q, dict):
            raise _bad(task, "each query must be an object", payload)
        tag = _as_str(task, q, "style_tag")
        if tag not in _STYLE_TAGS:
            raise _bad(task, f"unknown style tag {tag!r}", payload)
        out.append({"text": _as_str(task, q, "text"), "style_tag": tag})
    return {"queries": out}


def _parse_judge(task: Task, payload: dict) -> dict:
    dims = payload.get("dims")
    if not isinstance(dims, list) or len(dims) != 6:
        raise _bad(task, "field 'dims' must be a list of 6 scores", payload)
    for v in dims:
        if isinstance(v, bool) or not isinstance(v, int) or v not in (0, 1, 2):
            raise _bad(task, f"dimension scores must be 0/1/2, got {v!r}", payload)
    flag = payload.get("major_hallucination", False)
    if not isinstance(flag, bool):
        raise _bad(task, "field 'major_hallucination' must be a boolean", payload)
    return {"dims": list(dims), "major_hallucination": flag}


_PARSERS: Dict[Task, Callable[[Task, dict], dict]] = {
    Task.COARSE_LOCALIZE: _parse_spans,
    Task.REFINE: _parse_spans,
    Task.VERIFY: _parse_verify,
    Task.SUMMARIZE_CLASSIFY: _parse_summarize,
    Task.REFLECT: _parse_reflect,
    Task.COT_GENERATE: lambda t, p: {"text": _as_str(t, p, "text")},
    Task.EMOTION_FROM_TEXT: lambda t, p: {"emotion": _parse_emotion(t, p)},
    Task.EMOTION_FROM_TEXT_AND_CLIP: lambda t, p: {"emotion": _parse_emotion(t, p)},
    Task.QUERY_GENERATE: _parse_queries,
    Task.JUDGE: _parse_judge,
}


def parse_payload(task: Task, payload: dict) -> dict:
    """Validate and normalize a structured payload against its task schema.

    Raises MalformedModelOutput (with the offending payload attached) on any
    shape or range violation; extra keys are dropped.
    """
    if not isinstance(payload, dict):
        raise _bad(task, "payload must be a JSON object", payload)
    return _PARSERS[task](task, payload)


# ---------------------------------------------------------------- retry


_RETRYABLE = (TransportError, BackendTimeout, MalformedModelOutput)


def with_retry(backend: Backend, request: BackendRequest, max_attempts: int = 3,
               base_delay_s: float = 0.0,
               sleep: Callable[[float], None] = time.sleep) -> BackendResponse:
    """Invoke with bounded retries on transport, timeout, and malformed-output
    failures. Other exceptions propagate immediately. The returned response's
    usage carries the attempt count that was actually spent."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    last: Optional[Exception] = None
    for attempt in range(1, max_attempts + 1):
        try:
            response = backend.invoke(request)
        except _RETRYABLE as exc:
            last = exc
            if attempt < max_attempts and base_delay_s > 0:
                sleep(base_delay_s * (2 ** (attempt - 1)))
            continue
        usage = dict(response.usage)
        usage["attempts"] = attempt
        return BackendResponse(structured=response.structured, raw=response.raw, usage=usage)
    assert last is not None
    raise last
