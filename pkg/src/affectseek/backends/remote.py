"""Chat-completion-style HTTP backend.

Sends one user message per request and expects the reply content to carry a
JSON object matching the task schema. Network and shape failures map onto
the package's error taxonomy so callers can retry uniformly.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import requests

from ..errors import BackendTimeout, MalformedModelOutput, TransportError
from .base import BackendRequest, BackendResponse, extract_json_object, parse_payload, validate_request

DEFAULT_TOKEN_ENV = "AFFECTSEEK_API_TOKEN"


class RemoteBackend:
    def __init__(self, base_url: str, model: str, *,
                 token_env: str = DEFAULT_TOKEN_ENV,
                 timeout_s: float = 60.0,
                 temperature: float = 0.0,
                 session: Optional[requests.Session] = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.token_env = token_env
        self.timeout_s = timeout_s
        self.temperature = temperature
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _body(self, request: BackendRequest) -> dict:
        content = request.prompt
        media = None
        if request.media is not None:
            media = {"video_id": request.media.video_id, "uri": request.media.uri}
            focus = f"\n\n[media: {request.media.uri}"
            if request.span is not None:
                media["start_s"] = request.span.start_s
                media["end_s"] = request.span.end_s
                focus += f" @ {request.span.start_s:g}s..{request.span.end_s:g}s"
            content += focus + "]"
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        if media is not None:
            body["media"] = media
        return body

    def invoke(self, request: BackendRequest) -> BackendResponse:
        validate_request(request)
        url = f"{self.base_url}/chat/completions"
        try:
            resp = self._session.post(url, json=self._body(request),
                                      headers=self._headers(), timeout=self.timeout_s)
        except requests.Timeout as exc:
            raise BackendTimeout(f"{url}: no answer within {self.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise TransportError(f"{url}: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"{url}: server error {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"{url}: unexpected status {resp.status_code}: {resp.text[:200]}")
        try:
            envelope = resp.json()
            content = envelope["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedModelOutput(f"unexpected completion envelope: {exc}",
                                       raw=resp.text[:2000]) from exc
        if not isinstance(content, str):
            raise MalformedModelOutput("completion content is not text", raw=json.dumps(envelope)[:2000])
        payload = extract_json_object(content)
        structured = parse_payload(request.task, payload)
        usage = {}
        if isinstance(envelope.get("usage"), dict):
            usage = {k: v for k, v in envelope["usage"].items() if isinstance(v, int)}
        return BackendResponse(structured=structured, raw=content, usage=usage)
