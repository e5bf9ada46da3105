"""Serial and overlapped render engines.

Each worker group owns one slab of the decomposition.  In serial mode a
single worker alternates load and render per timestep.  In overlapped
mode the group runs two cooperating workers: a reader, gated by gate A,
that loads timestep data into the half of a double buffer selected by
timestep parity, and a renderer, gated by gate B, that consumes the other
half.  The renderer first requests timestep 0, waits for it, then keeps
one load in flight: request t+1, render t, wait.  The reader exits on a
terminate command.

The reader acknowledges each load command after emitting its load-start
event, so the log ordering BE_LOAD_START(t+1) <= BE_RENDER_START(t) is
deterministic rather than scheduler dependent.

Axis feedback from the viewer is applied at the next timestep load: the
loading worker re-runs the decomposition for the new axis, and payloads
from that timestep on carry the new axis and placement.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from corridor.backend import payload as wire
from corridor.backend.payload import FeedbackMessage, light_from_quad
from corridor.evlog.client import EventLogger
from corridor.evlog.records import BE_FRAME_START
from corridor.raycast import quantize, render_slab
from corridor.volume import (
    Axis,
    InvalidPartitionError,
    SlabAssignment,
    TransferFunction,
    decompose,
    default_transfer_function,
    slab_center_quad,
    texture_dims,
)

# User-defined tags beyond the canonical vocabulary.
TAG_BUF_ACQ = "BE_BUF_ACQ"
TAG_BUF_REL = "BE_BUF_REL"
TAG_AXIS_CHANGE = "BE_AXIS_CHANGE"


class Gate:
    """Binary gate: blocking acquire, idempotent single post."""

    def __init__(self):
        self._cond = threading.Condition()
        self._posted = False

    def post(self) -> None:
        with self._cond:
            self._posted = True
            self._cond.notify()

    def acquire(self, timeout: float | None = None) -> bool:
        with self._cond:
            if not self._cond.wait_for(lambda: self._posted, timeout=timeout):
                return False
            self._posted = False
            return True


CMD_TERMINATE = -1


class ControlCell:
    """Shared command cell: load timestep t (t >= 0) or terminate."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = CMD_TERMINATE

    def set(self, value: int) -> None:
        with self._lock:
            self._value = value

    def get(self) -> int:
        with self._lock:
            return self._value


@dataclass
class _BufferSlot:
    timestep: int = -1
    slab: np.ndarray | None = None
    axis: Axis = Axis.X
    direction: int = 1
    assignment: SlabAssignment | None = None


class DoubleBuffer:
    """Two staging halves; the half for timestep t is t mod 2."""

    def __init__(self):
        self.halves = (_BufferSlot(), _BufferSlot())

    def half_for(self, timestep: int) -> _BufferSlot:
        return self.halves[timestep % 2]


class AxisControl:
    """Axis choice shared by all worker groups; updated by viewer feedback."""

    def __init__(self, axis: Axis = Axis.X, direction: int = 1):
        self._lock = threading.Lock()
        self._axis = Axis.parse(axis)
        self._direction = 1 if direction >= 0 else -1

    def signal(self, axis: Axis, direction: int = 1) -> None:
        with self._lock:
            self._axis = Axis.parse(axis)
            self._direction = 1 if direction >= 0 else -1

    def current(self) -> tuple[Axis, int]:
        with self._lock:
            return self._axis, self._direction


class CaptureSender:
    """In-process sender that records payloads instead of transmitting."""

    def __init__(self):
        self._lock = threading.Lock()
        self.lights: list[tuple[int, wire.LightPayload]] = []
        self.heavies: list[tuple[int, int, bytes]] = []

    def send_light(self, worker: int, light: wire.LightPayload) -> None:
        with self._lock:
            self.lights.append((worker, light))

    def send_heavy(self, worker: int, frame: int, pixels: bytes) -> None:
        with self._lock:
            self.heavies.append((worker, frame, pixels))

    def close(self) -> None:
        pass


class ViewerLink:
    """One TCP connection from a worker to the viewer."""

    def __init__(self, endpoint: tuple[str, int], timeout: float = 30.0):
        self.endpoint = endpoint
        self.sock = socket.create_connection(endpoint, timeout=timeout)
        self.sock.settimeout(timeout)
        self._send_lock = threading.Lock()

    def send_light(self, worker: int, light: wire.LightPayload) -> None:
        with self._send_lock:
            self.sock.sendall(wire.pack_light_frame(worker, light))

    def send_heavy(self, worker: int, frame: int, pixels: bytes) -> None:
        with self._send_lock:
            self.sock.sendall(wire.pack_heavy_frame(worker, frame, pixels))

    def close(self) -> None:
        # shutdown() first: it wakes any thread blocked in recv on this
        # socket (the feedback listener) and sends FIN immediately; a bare
        # close() would be deferred until that recv returned.
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def feedback_listener(link: ViewerLink, axis_control: AxisControl, logger: EventLogger, stop: threading.Event):
    """Worker 0 reads feedback frames from its viewer connection and
    broadcasts the axis choice to all groups via the shared control."""

    def run():
        while not stop.is_set():
            try:
                header, payload = wire.read_frame(link.sock)
            except (ConnectionError, OSError, wire.WireError):
                return
            if header.msg_type != wire.MSG_FEEDBACK:
                logger.emit("BE_FEEDBACK_IGNORED", worker=0, extra={"msg_type": header.msg_type})
                continue
            try:
                msg = FeedbackMessage.unpack(header.frame, payload)
            except wire.WireError:
                logger.emit("BE_FEEDBACK_MALFORMED", worker=0)
                continue
            direction = 1 if msg.view_direction[int(msg.axis)] >= 0 else -1
            axis_control.signal(msg.axis, direction)

    thread = threading.Thread(target=run, name="feedback-listener", daemon=True)
    thread.start()
    return thread


@dataclass
class BackendContext:
    reader: object  # CacheVolumeReader | MemoryVolumeReader
    workers: int
    timesteps: int
    senders: dict | list  # indexed by worker
    logger: EventLogger
    tf: TransferFunction = field(default_factory=default_transfer_function)
    axis_control: AxisControl = field(default_factory=AxisControl)
    inject_load_s: float = 0.0
    inject_render_s: float = 0.0
    stop: threading.Event = field(default_factory=threading.Event)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.reader.meta.dims

    @property
    def value_range(self) -> tuple[float, float]:
        return self.reader.meta.value_range


@dataclass
class WorkerStats:
    frames_done: int = 0
    light_bytes: int = 0
    heavy_bytes: int = 0
    axis_history: list[tuple[int, str]] = field(default_factory=list)
    error: str | None = None


@dataclass
class BackendReport:
    mode: str
    workers: int
    timesteps: int
    wall_s: float
    stats: list[WorkerStats]
    aborted: bool

    @property
    def total_heavy_bytes(self) -> int:
        return sum(s.heavy_bytes for s in self.stats)

    @property
    def total_light_bytes(self) -> int:
        return sum(s.light_bytes for s in self.stats)


class _GroupState:
    """Worker-local view of the shared axis control."""

    def __init__(self, ctx: BackendContext, worker: int):
        self.ctx = ctx
        self.worker = worker
        self.prev_axis: Axis | None = None

    def resolve(self, timestep: int, stats: WorkerStats) -> tuple[SlabAssignment, Axis, int]:
        axis, direction = self.ctx.axis_control.current()
        try:
            assignment = decompose(self.ctx.dims, axis, self.ctx.workers)[self.worker]
        except InvalidPartitionError:
            # Unusable feedback: keep the previous (known-good) axis.
            self.ctx.logger.emit(
                "BE_AXIS_REJECTED", frame=timestep, worker=self.worker, extra={"axis": axis.name}
            )
            axis = self.prev_axis if self.prev_axis is not None else Axis.X
            assignment = decompose(self.ctx.dims, axis, self.ctx.workers)[self.worker]
        if self.prev_axis is not None and axis != self.prev_axis:
            self.ctx.logger.emit(
                TAG_AXIS_CHANGE, frame=timestep, worker=self.worker, extra={"axis": axis.name}
            )
        if self.prev_axis != axis:
            stats.axis_history.append((timestep, axis.name))
        self.prev_axis = axis
        return assignment, axis, direction


def _load_slab(ctx: BackendContext, state: _GroupState, t: int, stats: WorkerStats):
    """Load one timestep's slab, with the injected-delay hook applied."""
    assignment, axis, direction = state.resolve(t, stats)
    slab = ctx.reader.read_slab(t, assignment)
    if ctx.inject_load_s > 0:
        time.sleep(ctx.inject_load_s)
    return slab, axis, direction, assignment


def _process_frame(
    ctx: BackendContext,
    worker: int,
    t: int,
    slab: np.ndarray,
    axis: Axis,
    direction: int,
    assignment: SlabAssignment,
    stats: WorkerStats,
) -> None:
    """Light payload, render, heavy payload for one loaded timestep."""
    log = ctx.logger
    sender = ctx.senders[worker]
    width, height = texture_dims(ctx.dims, axis)
    quad = slab_center_quad(ctx.dims, assignment)
    light = light_from_quad(t, width, height, axis, quad)

    log.emit("BE_LIGHT_SEND", frame=t, worker=worker, extra={"axis": axis.name})
    sender.send_light(worker, light)
    log.emit("BE_LIGHT_END", frame=t, worker=worker, extra={"bytes": len(light.pack())})
    stats.light_bytes += len(light.pack())

    log.emit("BE_RENDER_START", frame=t, worker=worker)
    image = render_slab(slab, ctx.tf, axis, direction, ctx.value_range)
    if ctx.inject_render_s > 0:
        time.sleep(ctx.inject_render_s)
    log.emit("BE_RENDER_END", frame=t, worker=worker)

    pixels = quantize(image).tobytes()
    log.emit("BE_HEAVY_SEND", frame=t, worker=worker)
    sender.send_heavy(worker, t, pixels)
    log.emit("BE_HEAVY_END", frame=t, worker=worker, extra={"bytes": len(pixels)})
    stats.heavy_bytes += len(pixels)
    stats.frames_done += 1


def _serial_worker(ctx: BackendContext, worker: int, stats: WorkerStats) -> None:
    log = ctx.logger
    state = _GroupState(ctx, worker)
    try:
        for t in range(ctx.timesteps):
            if ctx.stop.is_set():
                return
            log.emit(BE_FRAME_START, frame=t, worker=worker)
            log.emit("BE_LOAD_START", frame=t, worker=worker)
            slab, axis, direction, assignment = _load_slab(ctx, state, t, stats)
            log.emit("BE_LOAD_END", frame=t, worker=worker, extra={"bytes": slab.nbytes})
            _process_frame(ctx, worker, t, slab, axis, direction, assignment, stats)
    except Exception as exc:  # noqa: BLE001 - reported in the run report
        stats.error = f"{type(exc).__name__}: {exc}"
        ctx.stop.set()


class WorkerGroup:
    """Overlapped reader/renderer pair sharing a double buffer and two gates."""

    def __init__(self, ctx: BackendContext, worker: int, stats: WorkerStats):
        self.ctx = ctx
        self.worker = worker
        self.stats = stats
        self.gate_a = Gate()  # reader admission
        self.gate_b = Gate()  # load-complete barrier for the renderer
        self.load_started = Gate()  # ack: load-start event emitted
        self.control = ControlCell()
        self.buffer = DoubleBuffer()
        self.reader_error: str | None = None
        self.state = _GroupState(ctx, worker)
        self.reader_thread = threading.Thread(
            target=self._reader_loop, name=f"reader-{worker}", daemon=True
        )

    # -- reader side -------------------------------------------------------

    def _reader_loop(self) -> None:
        log = self.ctx.logger
        while True:
            self.gate_a.acquire()
            cmd = self.control.get()
            if cmd == CMD_TERMINATE:
                return
            t = cmd
            log.emit(BE_FRAME_START, frame=t, worker=self.worker)
            log.emit("BE_LOAD_START", frame=t, worker=self.worker)
            self.load_started.post()
            half = t % 2
            log.emit(TAG_BUF_ACQ, frame=t, worker=self.worker, extra={"half": half, "role": "reader"})
            try:
                slab, axis, direction, assignment = _load_slab(self.ctx, self.state, t, self.stats)
            except Exception as exc:  # noqa: BLE001 - surfaced via reader_error
                self.reader_error = f"{type(exc).__name__}: {exc}"
                log.emit(TAG_BUF_REL, frame=t, worker=self.worker, extra={"half": half, "role": "reader"})
                self.gate_b.post()
                return
            slot = self.buffer.half_for(t)
            slot.timestep = t
            slot.slab = slab
            slot.axis = axis
            slot.direction = direction
            slot.assignment = assignment
            log.emit(TAG_BUF_REL, frame=t, worker=self.worker, extra={"half": half, "role": "reader"})
            log.emit("BE_LOAD_END", frame=t, worker=self.worker, extra={"bytes": slab.nbytes})
            self.gate_b.post()

    def _request_load(self, t: int) -> None:
        self.control.set(t)
        self.gate_a.post()
        self.load_started.acquire()

    def _terminate_reader(self) -> None:
        self.control.set(CMD_TERMINATE)
        self.gate_a.post()
        self.reader_thread.join(timeout=30.0)

    # -- renderer side -------------------------------------------------------

    def run(self) -> None:
        ctx, log, worker = self.ctx, self.ctx.logger, self.worker
        self.reader_thread.start()
        try:
            self._request_load(0)
            self.gate_b.acquire()
            for t in range(ctx.timesteps):
                if self.reader_error is not None:
                    self.stats.error = self.reader_error
                    ctx.stop.set()
                    return
                if ctx.stop.is_set():
                    return
                if t + 1 < ctx.timesteps:
                    self._request_load(t + 1)
                half = t % 2
                log.emit(TAG_BUF_ACQ, frame=t, worker=worker, extra={"half": half, "role": "renderer"})
                slot = self.buffer.half_for(t)
                if slot.timestep != t:
                    raise RuntimeError(f"buffer half {half} holds timestep {slot.timestep}, wanted {t}")
                try:
                    _process_frame(
                        ctx, worker, t, slot.slab, slot.axis, slot.direction, slot.assignment, self.stats
                    )
                finally:
                    log.emit(TAG_BUF_REL, frame=t, worker=worker, extra={"half": half, "role": "renderer"})
                if t + 1 < ctx.timesteps:
                    self.gate_b.acquire()
        except Exception as exc:  # noqa: BLE001 - reported in the run report
            self.stats.error = f"{type(exc).__name__}: {exc}"
            ctx.stop.set()
        finally:
            self._terminate_reader()


def run_backend(ctx: BackendContext, mode: str, worker_indices: list[int] | None = None) -> BackendReport:
    """Run the configured workers to completion; returns the run report."""
    if mode not in ("serial", "overlapped"):
        raise ValueError(f"unknown mode {mode!r}")
    indices = list(range(ctx.workers)) if worker_indices is None else list(worker_indices)
    stats = {w: WorkerStats() for w in indices}

    def task(w: int) -> None:
        if mode == "serial":
            _serial_worker(ctx, w, stats[w])
        else:
            WorkerGroup(ctx, w, stats[w]).run()

    threads = [threading.Thread(target=task, args=(w,), name=f"worker-{w}") for w in indices]
    t0 = time.monotonic()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.monotonic() - t0

    return BackendReport(
        mode=mode,
        workers=ctx.workers,
        timesteps=ctx.timesteps,
        wall_s=wall,
        stats=[stats[w] for w in indices],
        aborted=ctx.stop.is_set() or any(s.error for s in stats.values()),
    )
