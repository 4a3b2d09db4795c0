"""Line-delimited JSON I/O with atomic writes.

Every on-disk artifact of this package (corpora, splits, predictions,
judge outputs, review logs) is JSONL; this module is the single place
that knows how to read it tolerantly and write it atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator, Tuple, Union

from .errors import ParseError

PathLike = Union[str, Path]


def read_lines(path: PathLike) -> Iterator[Tuple[int, dict]]:
    """Yield (lineno, object) for each non-blank line; 1-based line numbers.

    Raises ParseError with the offending line number on invalid JSON or on
    a line whose top-level value is not an object.
    """
    p = Path(path)
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(p), lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(str(p), lineno, "expected a JSON object")
            yield lineno, obj


def dumps(obj: Any) -> str:
    """Canonical single-line rendering: sorted keys, no trailing spaces."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(", ", ": "))


def write_lines(path: PathLike, rows: Iterable[dict]) -> int:
    """Write rows as JSONL via a temp file + rename; returns the row count.

    The rename is atomic on POSIX, so a crash mid-write never leaves a
    truncated artifact behind.
    """
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    fd, tmp_name = tempfile.mkstemp(dir=str(p.parent), prefix=p.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(dumps(row))
                fh.write("\n")
                count += 1
        os.replace(tmp_name, p)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return count


def write_text(path: PathLike, text: str) -> None:
    """Atomic whole-file text write, same temp-then-rename discipline."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=str(p.parent), prefix=p.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_name, p)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
