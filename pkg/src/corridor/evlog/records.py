"""Event records and the fixed tag vocabulary.

One record per line, newline terminated:

    ts=<microseconds> host=<h> prog=<p> tag=<t> frame=<n> worker=<w> [k=v]...

Keys and values are whitespace-free tokens; values may not contain '='.
The format is human-greppable and logs from different emitters merge by
simple concatenation plus a timestamp sort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

VIEWER_TAGS = (
    "V_FRAME_START",
    "V_LIGHTPAYLOAD_START",
    "V_LIGHTPAYLOAD_END",
    "V_HEAVYPAYLOAD_START",
    "V_HEAVYPAYLOAD_END",
    "V_FRAME_END",
)

BACKEND_TAGS = (
    "BE_LOAD_START",
    "BE_LOAD_END",
    "BE_LIGHT_SEND",
    "BE_LIGHT_END",
    "BE_RENDER_START",
    "BE_RENDER_END",
    "BE_HEAVY_SEND",
    "BE_HEAVY_END",
)

# Alias emitted immediately before BE_LOAD_START; kept out of VOCABULARY so
# lifeline plots and ordering checks see exactly the canonical tag set.
BE_FRAME_START = "BE_FRAME_START"

# Lifeline order, bottom to top: back-end tags below, viewer tags on top.
VOCABULARY = BACKEND_TAGS + VIEWER_TAGS

_REQUIRED = ("ts", "host", "prog", "tag", "frame", "worker")


@dataclass
class EventRecord:
    ts_us: int
    host: str
    prog: str
    tag: str
    frame: int = -1
    worker: int = -1
    extra: dict[str, str] = field(default_factory=dict)


class RecordFormatError(ValueError):
    """A log line does not parse as an event record."""


def _check_token(text: str, what: str, allow_equals: bool = False) -> str:
    if not text:
        raise RecordFormatError(f"empty {what}")
    if any(c.isspace() for c in text):
        raise RecordFormatError(f"{what} contains whitespace: {text!r}")
    if not allow_equals and "=" in text:
        raise RecordFormatError(f"{what} contains '=': {text!r}")
    return text


def serialize_record(rec: EventRecord) -> str:
    """Render one record as its log line (no trailing newline)."""
    _check_token(rec.tag, "tag")
    parts = [
        f"ts={int(rec.ts_us)}",
        f"host={_check_token(rec.host, 'host')}",
        f"prog={_check_token(rec.prog, 'prog')}",
        f"tag={rec.tag}",
        f"frame={int(rec.frame)}",
        f"worker={int(rec.worker)}",
    ]
    for key, value in rec.extra.items():
        _check_token(key, "extra key")
        if key in _REQUIRED:
            raise RecordFormatError(f"extra key shadows required field: {key}")
        value = str(value)
        if value and (any(c.isspace() for c in value) or "=" in value):
            raise RecordFormatError(f"extra value not a token: {value!r}")
        parts.append(f"{key}={value}")
    return " ".join(parts)


def parse_line(line: str) -> EventRecord:
    line = line.strip()
    if not line:
        raise RecordFormatError("blank line")
    fields: dict[str, str] = {}
    extra: dict[str, str] = {}
    for token in line.split():
        if "=" not in token:
            raise RecordFormatError(f"token without '=': {token!r}")
        key, value = token.split("=", 1)
        if key in _REQUIRED:
            if key in fields:
                raise RecordFormatError(f"duplicate field {key}")
            fields[key] = value
        else:
            extra[key] = value
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise RecordFormatError(f"missing fields: {missing}")
    try:
        return EventRecord(
            ts_us=int(fields["ts"]),
            host=fields["host"],
            prog=fields["prog"],
            tag=fields["tag"],
            frame=int(fields["frame"]),
            worker=int(fields["worker"]),
            extra=extra,
        )
    except ValueError as exc:
        raise RecordFormatError(str(exc)) from exc


def parse_log(source) -> list[EventRecord]:
    """Parse a log file path or an iterable of lines; blank lines are skipped."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            lines: Iterable[str] = fh.readlines()
    else:
        lines = source
    records = []
    for line in lines:
        if line.strip():
            records.append(parse_line(line))
    return records


def merge_records(*groups: Iterable[EventRecord]) -> list[EventRecord]:
    """Merge record streams into one list ordered by timestamp (stable)."""
    merged: list[EventRecord] = []
    for group in groups:
        merged.extend(group)
    merged.sort(key=lambda r: r.ts_us)
    return merged


def iter_frames(records: Iterable[EventRecord]) -> Iterator[tuple[tuple[str, int, int], list[EventRecord]]]:
    """Group records by (prog, worker, frame), preserving in-group order."""
    grouped: dict[tuple[str, int, int], list[EventRecord]] = {}
    for rec in records:
        grouped.setdefault((rec.prog, rec.worker, rec.frame), []).append(rec)
    yield from grouped.items()
