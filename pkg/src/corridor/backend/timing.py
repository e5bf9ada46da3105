"""Serial vs overlapped pipeline timing model.

With per-timestep load time L and render time R over N timesteps:

    T_serial     = N * (L + R)
    T_overlapped = N * max(L, R) + min(L, R)

When L and R are equal the speedup is 2N/(N+1), approaching 2x for long
runs; it degrades toward 1x as L and R diverge.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TimingModel:
    load_s: float
    render_s: float
    timesteps: int

    def __post_init__(self):
        if self.load_s < 0 or self.render_s < 0:
            raise ValueError("load/render times must be non-negative")
        if self.timesteps < 1:
            raise ValueError("need at least one timestep")


def predict(model: TimingModel) -> tuple[float, float, float]:
    """Returns (T_serial, T_overlapped, speedup)."""
    n, load, render = model.timesteps, model.load_s, model.render_s
    t_serial = n * (load + render)
    t_overlapped = n * max(load, render) + min(load, render)
    speedup = t_serial / t_overlapped if t_overlapped > 0 else 1.0
    return t_serial, t_overlapped, speedup


def equal_phase_speedup_bound(timesteps: int) -> float:
    """Speedup when L == R: 2N/(N+1)."""
    return 2.0 * timesteps / (timesteps + 1.0)
