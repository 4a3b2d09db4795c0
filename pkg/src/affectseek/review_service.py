"""HTTP surface for the human review queue.

Thin FastAPI wrapper over ReviewQueue plus range-capable serving of the
fixture media files, so a browser-based review tool can list escalated
clips, inspect their failed rounds, scrub the relevant segment, and submit
corrections. All errors come back as JSON {"error": code, "detail": text}.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .annotation import ReviewQueue, ReviewStatus, Verifier, review_item_to_dict
from .errors import (
    AffectSeekError,
    ItemNotPending,
    NotFound,
    UnknownEmotion,
    ValidationError,
)

_MEDIA_EXTENSIONS = (".mp4", ".webm", ".mkv", ".mov", ".m4v", ".bin")


class CorrectionBody(BaseModel):
    rationale: str
    emotion: str
    reviewer: str


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def _item_summary(item) -> dict:
    last_failure = None
    if item.history:
        outcome = item.history[-1].outcome
        last_failure = {"path1": outcome.path1.value, "path2": outcome.path2.value,
                        "gold": outcome.gold.value}
    return {
        "clip_id": item.clip_id,
        "video_id": item.media.video_id,
        "gold_emotion": item.gold_emotion.value,
        "status": item.status.value,
        "escalated_at": item.escalated_at,
        "rounds": len(item.history),
        "last_failure": last_failure,
    }


def _parse_range(header: str, size: int) -> Optional[tuple]:
    """Parse a single bytes range; None means the header is unusable."""
    if not header.startswith("bytes="):
        return None
    spec = header[len("bytes="):].strip()
    if "," in spec or "-" not in spec:
        return None
    start_s, _, end_s = spec.partition("-")
    try:
        if start_s == "":
            # suffix range: last N bytes
            n = int(end_s)
            if n <= 0:
                return None
            return max(size - n, 0), size - 1
        start = int(start_s)
        end = int(end_s) if end_s else size - 1
    except ValueError:
        return None
    if start >= size or start > end:
        return None
    return start, min(end, size - 1)


def create_app(queue: ReviewQueue, *, media_dir=None,
               verifier: Optional[Verifier] = None, token: Optional[str] = None,
               audit: bool = True) -> FastAPI:
    """Build the service around an existing queue.

    `token`, when set, gates /api/* behind `Authorization: Bearer <token>`;
    /media additionally accepts ?token= because media elements cannot set
    request headers.
    """
    app = FastAPI(title="affectseek review service", docs_url=None, redoc_url=None)
    media_root = Path(media_dir) if media_dir is not None else None

    @app.exception_handler(NotFound)
    async def _not_found(request: Request, exc: NotFound):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ItemNotPending)
    async def _conflict(request: Request, exc: ItemNotPending):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(ValidationError)
    async def _invalid(request: Request, exc: ValidationError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(UnknownEmotion)
    async def _unknown_emotion(request: Request, exc: UnknownEmotion):
        return _error(422, "unknown_emotion", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return _error(422, "validation", str(exc.errors()[:3]))

    @app.exception_handler(AffectSeekError)
    async def _generic(request: Request, exc: AffectSeekError):
        return _error(400, "error", str(exc))

    def _authorized(request: Request, allow_query: bool = False) -> Optional[JSONResponse]:
        if token is None:
            return None
        header = request.headers.get("authorization", "")
        if header == f"Bearer {token}":
            return None
        if allow_query and request.query_params.get("token") == token:
            return None
        return _error(401, "unauthorized", "missing or invalid bearer token")

    @app.get("/api/review")
    async def list_items(request: Request, status: Optional[str] = None,
                         page: int = 1, page_size: int = 20):
        denied = _authorized(request)
        if denied:
            return denied
        status_filter = None
        if status is not None:
            try:
                status_filter = ReviewStatus(status)
            except ValueError:
                raise ValidationError("<status>", f"unknown status {status!r}") from None
        items, total = queue.page(status_filter, page=page, page_size=page_size)
        return {
            "items": [_item_summary(i) for i in items],
            "total": total,
            "page": page,
            "page_size": page_size,
        }

    @app.get("/api/review/{clip_id}")
    async def get_item(request: Request, clip_id: str):
        denied = _authorized(request)
        if denied:
            return denied
        item = queue.get(clip_id)
        return {
            "item": review_item_to_dict(item),
            "media": {
                "url": f"/media/{item.media.video_id}",
                "start_s": item.span.start_s,
                "end_s": item.span.end_s,
            },
        }

    @app.post("/api/review/{clip_id}")
    async def submit_correction(request: Request, clip_id: str, body: CorrectionBody):
        denied = _authorized(request)
        if denied:
            return denied
        updated = queue.submit(clip_id, body.rationale, body.emotion, body.reviewer,
                               verifier=verifier, audit=audit)
        return {
            "item": review_item_to_dict(updated),
            "accepted": updated.status is ReviewStatus.ACCEPTED,
        }

    def _resolve_media(video_id: str) -> Path:
        if media_root is None:
            raise NotFound("no media directory configured")
        if "/" in video_id or "\\" in video_id or ".." in video_id:
            raise NotFound(f"no media for {video_id!r}")
        for ext in ("",) + _MEDIA_EXTENSIONS:
            candidate = media_root / f"{video_id}{ext}"
            if candidate.is_file():
                return candidate
        raise NotFound(f"no media file for video {video_id!r}")

    @app.get("/media/{video_id}")
    async def serve_media(request: Request, video_id: str):
        denied = _authorized(request, allow_query=True)
        if denied:
            return denied
        path = _resolve_media(video_id)
        data = path.read_bytes()
        size = len(data)
        content_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        common = {"Accept-Ranges": "bytes", "Content-Type": content_type}
        range_header = request.headers.get("range")
        if range_header is None:
            return Response(content=data, status_code=200, headers=common)
        parsed = _parse_range(range_header, size)
        if parsed is None:
            return Response(status_code=416,
                            headers={**common, "Content-Range": f"bytes */{size}"})
        start, end = parsed
        return Response(
            content=data[start:end + 1], status_code=206,
            headers={**common, "Content-Range": f"bytes {start}-{end}/{size}"})

    return app
