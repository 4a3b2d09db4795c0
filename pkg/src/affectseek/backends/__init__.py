"""Model-backend abstraction: one request/response surface, multiple transports."""

from .base import (
    Backend,
    BackendRequest,
    BackendResponse,
    Task,
    extract_json_object,
    parse_payload,
    validate_request,
    with_retry,
)
from .scripted import FailureInjectionBackend, ScriptedBackend, load_fixture
from .remote import RemoteBackend

__all__ = [
    "Backend",
    "BackendRequest",
    "BackendResponse",
    "Task",
    "extract_json_object",
    "parse_payload",
    "validate_request",
    "with_retry",
    "ScriptedBackend",
    "FailureInjectionBackend",
    "load_fixture",
    "RemoteBackend",
]
