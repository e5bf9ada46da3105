"""Trace analysis: per-frame load/render phases, overlap, throughput.

L for a frame is the displacement between BE_LOAD_START and BE_LOAD_END;
R between BE_RENDER_START and BE_RENDER_END.  A frame missing one side of
a pair is marked incomplete and excluded from the aggregates.  The overlap
fraction counts interior frames whose next-frame load begins before the
current frame's render ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from corridor.evlog.records import BACKEND_TAGS, EventRecord, parse_log
from corridor.rates import throughput_mbps

_PAIRS = (
    ("BE_LOAD_START", "BE_LOAD_END", "load_s"),
    ("BE_RENDER_START", "BE_RENDER_END", "render_s"),
    ("BE_LIGHT_SEND", "BE_LIGHT_END", "light_s"),
    ("BE_HEAVY_SEND", "BE_HEAVY_END", "heavy_s"),
)


@dataclass
class FramePhases:
    worker: int
    frame: int
    tags: dict[str, int] = field(default_factory=dict)  # tag -> ts_us (first occurrence)
    load_s: float | None = None
    render_s: float | None = None
    light_s: float | None = None
    heavy_s: float | None = None
    load_bytes: int | None = None
    heavy_bytes: int | None = None

    @property
    def complete(self) -> bool:
        return self.load_s is not None and self.render_s is not None


@dataclass
class PhaseReport:
    frames: dict[tuple[int, int], FramePhases]
    mean_load_s: float | None
    mean_render_s: float | None
    wall_s: float
    overlap_fraction: float | None
    interior_frames: int
    incomplete: list[tuple[int, int]]
    violations: list[str]
    record_count: int
    mean_load_mbps: float | None
    mean_heavy_mbps: float | None

    def to_dict(self) -> dict:
        return {
            "mean_load_s": self.mean_load_s,
            "mean_render_s": self.mean_render_s,
            "wall_s": self.wall_s,
            "overlap_fraction": self.overlap_fraction,
            "interior_frames": self.interior_frames,
            "incomplete_frames": [list(k) for k in self.incomplete],
            "ordering_violations": self.violations,
            "record_count": self.record_count,
            "mean_load_mbps": self.mean_load_mbps,
            "mean_heavy_mbps": self.mean_heavy_mbps,
            "frame_count": len(self.frames),
        }


def table2_violations(records: Iterable[EventRecord]) -> list[str]:
    """Check the eight back-end tags per (worker, frame): each exactly once,
    timestamps non-decreasing in vocabulary order."""
    grouped: dict[tuple[int, int], list[EventRecord]] = {}
    for rec in records:
        if rec.tag in BACKEND_TAGS:
            grouped.setdefault((rec.worker, rec.frame), []).append(rec)
    problems = []
    order = {tag: i for i, tag in enumerate(BACKEND_TAGS)}
    for (worker, frame), recs in sorted(grouped.items()):
        counts: dict[str, int] = {}
        for rec in recs:
            counts[rec.tag] = counts.get(rec.tag, 0) + 1
        for tag in BACKEND_TAGS:
            n = counts.get(tag, 0)
            if n != 1:
                problems.append(f"worker {worker} frame {frame}: tag {tag} appears {n} times")
        if any(counts.get(t, 0) != 1 for t in BACKEND_TAGS):
            continue
        recs = sorted(recs, key=lambda r: r.ts_us)
        ranks = [order[r.tag] for r in recs]
        if ranks != sorted(ranks):
            problems.append(f"worker {worker} frame {frame}: tags out of order {[r.tag for r in recs]}")
    return problems


def _extract_frames(records: Iterable[EventRecord]) -> dict[tuple[int, int], FramePhases]:
    frames: dict[tuple[int, int], FramePhases] = {}
    for rec in records:
        if rec.tag not in BACKEND_TAGS:
            continue
        key = (rec.worker, rec.frame)
        fp = frames.setdefault(key, FramePhases(worker=rec.worker, frame=rec.frame))
        fp.tags.setdefault(rec.tag, rec.ts_us)
        if rec.tag == "BE_LOAD_END" and "bytes" in rec.extra:
            fp.load_bytes = int(rec.extra["bytes"])
        if rec.tag == "BE_HEAVY_END" and "bytes" in rec.extra:
            fp.heavy_bytes = int(rec.extra["bytes"])
    for fp in frames.values():
        for start, end, attr in _PAIRS:
            if start in fp.tags and end in fp.tags:
                setattr(fp, attr, (fp.tags[end] - fp.tags[start]) / 1e6)
    return frames


def _overlap_fraction(frames: dict[tuple[int, int], FramePhases]) -> tuple[float | None, int]:
    hits = 0
    total = 0
    by_worker: dict[int, dict[int, FramePhases]] = {}
    for (worker, frame), fp in frames.items():
        by_worker.setdefault(worker, {})[frame] = fp
    for worker_frames in by_worker.values():
        for frame, fp in worker_frames.items():
            nxt = worker_frames.get(frame + 1)
            if nxt is None:
                continue
            if "BE_RENDER_END" not in fp.tags or "BE_LOAD_START" not in nxt.tags:
                continue
            total += 1
            if nxt.tags["BE_LOAD_START"] < fp.tags["BE_RENDER_END"]:
                hits += 1
    if total == 0:
        return None, 0
    return hits / total, total


def analyze_records(records: list[EventRecord]) -> PhaseReport:
    frames = _extract_frames(records)
    complete = [fp for fp in frames.values() if fp.complete]
    incomplete = sorted(k for k, fp in frames.items() if not fp.complete)
    mean_load = sum(fp.load_s for fp in complete) / len(complete) if complete else None
    mean_render = sum(fp.render_s for fp in complete) / len(complete) if complete else None
    wall = (max(r.ts_us for r in records) - min(r.ts_us for r in records)) / 1e6 if records else 0.0
    overlap, interior = _overlap_fraction(frames)

    load_rates = [
        throughput_mbps(fp.load_bytes, fp.load_s)
        for fp in complete
        if fp.load_bytes is not None and fp.load_s and fp.load_s > 0
    ]
    heavy_rates = [
        throughput_mbps(fp.heavy_bytes, fp.heavy_s)
        for fp in complete
        if fp.heavy_bytes is not None and fp.heavy_s and fp.heavy_s > 0
    ]
    return PhaseReport(
        frames=frames,
        mean_load_s=mean_load,
        mean_render_s=mean_render,
        wall_s=wall,
        overlap_fraction=overlap,
        interior_frames=interior,
        incomplete=incomplete,
        violations=table2_violations(records),
        record_count=len(records),
        mean_load_mbps=sum(load_rates) / len(load_rates) if load_rates else None,
        mean_heavy_mbps=sum(heavy_rates) / len(heavy_rates) if heavy_rates else None,
    )


def analyze_log(path) -> PhaseReport:
    return analyze_records(parse_log(path))
