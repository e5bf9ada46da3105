"""Lifeline plots: elapsed time on x, one horizontal line per tag on y.

Tags are stacked bottom-to-top in vocabulary order (back-end tags below,
viewer tags above).  Each (program, worker, frame) contributes one
polyline through its events; even frames are drawn red, odd frames blue.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from corridor.evlog.records import EventRecord, VOCABULARY, parse_log

EVEN_COLOR = "#d62728"
ODD_COLOR = "#1f77b4"


@dataclass
class PlotInfo:
    path: str
    lifelines: list[str]
    polyline_count: int


def plot_records(records: list[EventRecord], out_path, title: str | None = None) -> PlotInfo:
    if not records:
        raise ValueError("empty log: nothing to plot")

    present = {r.tag for r in records}
    lifelines = [tag for tag in VOCABULARY if tag in present]
    if not lifelines:
        raise ValueError("log contains no vocabulary tags")
    level = {tag: i for i, tag in enumerate(lifelines)}

    t0 = min(r.ts_us for r in records)
    groups: dict[tuple[str, int, int], list[EventRecord]] = {}
    for rec in records:
        if rec.tag in level:
            groups.setdefault((rec.prog, rec.worker, rec.frame), []).append(rec)

    fig, ax = plt.subplots(figsize=(10, 0.5 * len(lifelines) + 2))
    for y in level.values():
        ax.axhline(y, color="0.85", linewidth=0.6, zorder=0)

    count = 0
    for (prog, worker, frame), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r.ts_us)
        xs = [(r.ts_us - t0) / 1e6 for r in recs]
        ys = [level[r.tag] for r in recs]
        color = EVEN_COLOR if frame % 2 == 0 else ODD_COLOR
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.0, color=color, zorder=2)
        count += 1

    ax.set_yticks(range(len(lifelines)))
    ax.set_yticklabels(lifelines, fontsize=8)
    ax.set_xlabel("elapsed time (s)")
    ax.set_ylim(-0.5, len(lifelines) - 0.5)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return PlotInfo(path=str(out_path), lifelines=lifelines, polyline_count=count)


def plot_log(log_path, out_path, title: str | None = None) -> PlotInfo:
    return plot_records(parse_log(log_path), out_path, title=title)
