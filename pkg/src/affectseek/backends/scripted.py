"""Deterministic fixture-backed backend for tests, replay, and offline runs.

A fixture file holds one entry per line: {"video_id", "task", "key",
"response"}. Lookup is a pure function of (fixture, request): same request,
same response, no hidden state. Failure injection is a separate wrapper so
the scripted backend itself stays pure.
"""

from __future__ import annotations

import json
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .. import jsonl
from ..errors import FixtureMiss, ValidationError
from .base import BackendRequest, BackendResponse, Task, parse_payload, validate_request

WILDCARD = "*"

# (video_id, task, key) -> structured payload
FixtureKey = Tuple[str, str, str]


def derive_key(request: BackendRequest) -> str:
    """The fixture key a request resolves to, before wildcard fallback.

    Precedence: an explicit context fixture_key, then the span rendered as
    'start-end', then the query text, then raw text, then the empty key.
    """
    ctx = request.context
    if "fixture_key" in ctx:
        return str(ctx["fixture_key"])
    if request.span is not None:
        return request.span.key()
    if "query" in ctx:
        return str(ctx["query"])
    if "text" in ctx:
        return str(ctx["text"])
    return ""


def _attempt(request: BackendRequest) -> int:
    raw = request.context.get("attempt", "1")
    try:
        n = int(raw)
    except (TypeError, ValueError):
        return 1
    return max(n, 1)


def load_fixture(path) -> Dict[FixtureKey, dict]:
    entries: Dict[FixtureKey, dict] = {}
    for lineno, obj in jsonl.read_lines(path):
        rid = f"line {lineno}"
        for name in ("video_id", "task", "key"):
            if name not in obj or not isinstance(obj[name], str):
                raise ValidationError(rid, f"missing or invalid field {name!r}")
        try:
            task = Task(obj["task"])
        except ValueError:
            raise ValidationError(rid, f"unknown task {obj['task']!r}") from None
        if not isinstance(obj.get("response"), dict):
            raise ValidationError(rid, "field 'response' must be an object")
        key = (obj["video_id"], task.value, obj["key"])
        if key in entries:
            raise ValidationError(rid, f"duplicate fixture entry {key}")
        entries[key] = obj["response"]
    return entries


# Tasks that have a safe null response when no fixture entry matches:
# verification of an unknown span is simply "not relevant".
_DEFAULTS = {
    Task.VERIFY: {
        "alpha": 0.0,
        "visual_evidence": "",
        "uncertainty": 1.0,
        "rationale": "no fixture evidence for this span",
    },
}


class ScriptedBackend:
    """Replays canned structured responses keyed by (video, task, key).

    Attempt counters above 1 probe '<key>#aN' before falling back to the
    plain key, which lets a fixture give round-specific answers without
    duplicating every entry. Exact-key matches (either the request's video
    or the '*' wildcard) beat per-video wildcard entries.
    """

    def __init__(self, entries: Dict[FixtureKey, dict]):
        self._entries = dict(entries)

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        return cls(load_fixture(path))

    def invoke(self, request: BackendRequest) -> BackendResponse:
        validate_request(request)
        video_id = request.media.video_id if request.media is not None else WILDCARD
        base_key = derive_key(request)
        attempt = _attempt(request)
        keys = [f"{base_key}#a{attempt}"] if attempt > 1 else []
        keys.append(base_key)

        probed: List[FixtureKey] = []
        payload: Optional[dict] = None
        for key in keys:
            for vid in (video_id, WILDCARD):
                probe = (vid, request.task.value, key)
                probed.append(probe)
                if probe in self._entries:
                    payload = self._entries[probe]
                    break
            if payload is not None:
                break
        if payload is None:
            for vid in (video_id, WILDCARD):
                probe = (vid, request.task.value, WILDCARD)
                probed.append(probe)
                if probe in self._entries:
                    payload = self._entries[probe]
                    break
        if payload is None:
            payload = _DEFAULTS.get(request.task)
        if payload is None:
            tried = ", ".join(repr(k) for k in probed)
            raise FixtureMiss(f"no fixture entry for any of: {tried}")

        structured = parse_payload(request.task, payload)
        return BackendResponse(structured=structured, raw=json.dumps(payload, sort_keys=True))


class FailureInjectionBackend:
    """Wraps a backend and fails the first `times` matching invocations.

    `error_factory` builds the exception to raise; `tasks` limits injection
    to specific task types (None means all). Counting is per wrapper
    instance, so the wrapped backend stays pure.
    """

    def __init__(self, inner, error_factory: Callable[[], Exception],
                 times: int = 1, tasks: Optional[Iterable[Task]] = None):
        self._inner = inner
        self._error_factory = error_factory
        self._remaining = times
        self._tasks: Optional[Set[Task]] = set(tasks) if tasks is not None else None
        self.calls = 0
        self.injected = 0

    def invoke(self, request: BackendRequest) -> BackendResponse:
        self.calls += 1
        if self._remaining > 0 and (self._tasks is None or request.task in self._tasks):
            self._remaining -= 1
            self.injected += 1
            raise self._error_factory()
        return self._inner.invoke(request)
