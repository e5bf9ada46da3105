"""Bandwidth arithmetic shared by the analyzer and the run reports.

Rates use decimal megabits: 1 Mbps = 10^6 bits per second.
"""

from __future__ import annotations


def throughput_mbps(nbytes: int, seconds: float) -> float:
    """Average transfer rate in Mbps for `nbytes` moved in `seconds`."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    return 8.0 * nbytes / seconds / 1e6


def required_rate_mbps(pixels: int, bytes_per_pixel: int, fps: float) -> float:
    """Sustained rate needed to stream raw frames of `pixels` at `fps`."""
    return pixels * bytes_per_pixel * 8.0 * fps / 1e6
