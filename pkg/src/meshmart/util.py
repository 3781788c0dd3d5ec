"""Shared small helpers: timestamps, compact JSON, atomic file writes."""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone

# Fixed-width RFC3339 so lexicographic order equals chronological order.
_TS_FMT = "%Y-%m-%dT%H:%M:%S.%f+00:00"


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).strftime(_TS_FMT)


def to_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime(_TS_FMT)


def parse_rfc3339(text: str) -> datetime:
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def minute_bucket(ts: str) -> str:
    """Floor an RFC3339 timestamp to 1-minute granularity."""
    dt = parse_rfc3339(ts)
    return to_rfc3339(dt.replace(second=0, microsecond=0))


def dumps_compact(value) -> str:
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


def dumps_canonical(value) -> str:
    """Deterministic serialization: sorted keys, compact separators."""
    return json.dumps(value, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def atomic_write_text(path: str, text: str, fsync: bool = True) -> None:
    """Write a file via tmp-then-rename so readers never observe a torn write."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            if fsync:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def fsync_dir(path: str) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
