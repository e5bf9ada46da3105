"""Scene state shared between receiver workers and the compositing driver.

Slots update independently, one per back-end worker; a composite never
mixes one slot's light metadata with another frame's heavy pixels because
the (light, pixels) pair is installed under the scene lock as a unit and
snapshots are taken under the same lock.
"""

from __future__ import annotations

import threading

import numpy as np

from corridor.backend.payload import LightPayload
from corridor.raycast import dequantize, gaze_direction
from corridor.volume import Axis, choose_axis


class SceneGraph:
    """Latest (light, texture) pair per back-end worker."""

    def __init__(self, workers: int):
        self.workers = workers
        self._lock = threading.Lock()
        self._slots: list[tuple[LightPayload, np.ndarray] | None] = [None] * workers
        self._frames: list[int] = [-1] * workers
        self.installs = 0
        self._listeners: list = []

    def add_listener(self, fn) -> None:
        """fn(worker, light, pixel_bytes) called after each install."""
        self._listeners.append(fn)

    def install(self, worker: int, light: LightPayload, pixels: bytes) -> None:
        if not (0 <= worker < self.workers):
            raise ValueError(f"worker {worker} outside 0..{self.workers - 1}")
        expected = light.width * light.height * light.bytes_per_pixel
        if len(pixels) != expected:
            raise ValueError(f"pixel payload is {len(pixels)} bytes, light payload says {expected}")
        texture = dequantize(
            np.frombuffer(pixels, dtype=np.uint8).reshape(light.height, light.width, light.bytes_per_pixel)
        )
        with self._lock:
            self._slots[worker] = (light, texture)
            self._frames[worker] = light.frame
            self.installs += 1
        for fn in self._listeners:
            fn(worker, light, pixels)

    def snapshot(self) -> list[tuple[LightPayload, np.ndarray]]:
        """Consistent view of the populated slots (textures are immutable)."""
        with self._lock:
            return [slot for slot in self._slots if slot is not None]

    def slot_frames(self) -> list[int]:
        with self._lock:
            return list(self._frames)

    def slot(self, worker: int) -> tuple[LightPayload, np.ndarray] | None:
        with self._lock:
            return self._slots[worker]


class ViewState:
    """Current orientation plus the derived view direction and best axis."""

    def __init__(self, orientation: np.ndarray | None = None):
        self._lock = threading.Lock()
        self._orientation = np.eye(3) if orientation is None else self._validated(orientation)

    @staticmethod
    def _validated(orientation) -> np.ndarray:
        m = np.asarray(orientation, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"orientation must be 3x3, got {m.shape}")
        if not np.allclose(m @ m.T, np.eye(3), atol=1e-6):
            raise ValueError("orientation is not orthonormal")
        if np.linalg.det(m) < 0:
            raise ValueError("orientation is a reflection, not a rotation")
        return m

    def set(self, orientation) -> np.ndarray:
        m = self._validated(orientation)
        with self._lock:
            self._orientation = m
        return m

    @property
    def orientation(self) -> np.ndarray:
        with self._lock:
            return self._orientation

    @property
    def view_direction(self) -> np.ndarray:
        return gaze_direction(self.orientation)

    @property
    def best_axis(self) -> Axis:
        return choose_axis(self.view_direction)
