"""Precision event instrumentation: records, emitters, collector, analysis, plots."""

from corridor.evlog.records import (
    BACKEND_TAGS,
    BE_FRAME_START,
    EventRecord,
    VIEWER_TAGS,
    VOCABULARY,
    merge_records,
    parse_line,
    parse_log,
    serialize_record,
)
from corridor.evlog.client import CollectorSink, EventLogger, FileSink, MemorySink
from corridor.evlog.collector import Collector
from corridor.evlog.analyze import PhaseReport, analyze_log, analyze_records, table2_violations

__all__ = [
    "BACKEND_TAGS",
    "BE_FRAME_START",
    "Collector",
    "CollectorSink",
    "EventLogger",
    "EventRecord",
    "FileSink",
    "MemorySink",
    "PhaseReport",
    "VIEWER_TAGS",
    "VOCABULARY",
    "analyze_log",
    "analyze_records",
    "merge_records",
    "parse_line",
    "parse_log",
    "serialize_record",
    "table2_violations",
]
