"""Network side of the viewer: receiver workers and the steering core.

One receiver per back-end connection parses light/heavy frame pairs,
emits the viewer event tags, and installs the pair into the scene slot
atomically.  A malformed or truncated frame drops that connection and
freezes its slot at the last good frame.  The core tracks the view
orientation; when the derived best axis changes it sends exactly one
feedback message upstream through worker 0's connection.
"""

from __future__ import annotations

import socket
import socketserver
import threading

import numpy as np

from corridor.backend import payload as wire
from corridor.backend.payload import FeedbackMessage, LightPayload
from corridor.evlog.client import EventLogger
from corridor.viewer.compositor import composite_scene
from corridor.viewer.scene import SceneGraph, ViewState
from corridor.volume import Axis

TAG_AXIS_FEEDBACK = "V_AXIS_FEEDBACK"


class ViewerCore:
    """Scene plus view state plus the upstream feedback rule."""

    def __init__(self, workers: int, logger: EventLogger, orientation=None):
        from corridor.raycast import axis_base_orientation

        if orientation is None:
            orientation = axis_base_orientation(Axis.X)  # match the back end's default
        self.scene = SceneGraph(workers)
        self.view = ViewState(orientation)
        self.logger = logger
        self._feedback_lock = threading.Lock()
        self._feedback_sock: socket.socket | None = None
        self._pending: FeedbackMessage | None = None
        self._last_sent_axis: Axis = self.view.best_axis

    def attach_feedback_channel(self, sock: socket.socket) -> None:
        with self._feedback_lock:
            self._feedback_sock = sock
            pending, self._pending = self._pending, None
        if pending is not None:
            self._send(pending)

    def _send(self, msg: FeedbackMessage) -> None:
        with self._feedback_lock:
            sock = self._feedback_sock
            if sock is None:
                self._pending = msg
                return
            try:
                sock.sendall(msg.pack_frame())
            except OSError:
                self._feedback_sock = None
                self._pending = msg
                return
        self.logger.emit(TAG_AXIS_FEEDBACK, frame=msg.frame, extra={"axis": msg.axis.name})

    def update_view(self, orientation) -> bool:
        """Install a new orientation; returns True if feedback was sent.

        Compositing reflects the new orientation immediately regardless of
        upstream state; a feedback message goes out only when the best
        axis actually changed.
        """
        self.view.set(orientation)
        best = self.view.best_axis
        if best == self._last_sent_axis:
            return False
        self._last_sent_axis = best
        gaze = self.view.view_direction
        frame = max(self.scene.slot_frames(), default=-1)
        self._send(FeedbackMessage(axis=best, view_direction=tuple(float(v) for v in gaze), frame=max(frame, 0)))
        return True

    def composite(self, out_size=(512, 512)) -> np.ndarray:
        return composite_scene(self.scene, self.view.orientation, out_size)


class _ReceiverHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ViewerServer = self.server.owner
        sock = self.request
        logger = server.logger
        worker = None
        try:
            while True:
                header, payload = wire.read_frame(sock)
                if worker is None:
                    worker = header.worker_index
                    server.register_connection(worker, sock)
                logger.emit("V_FRAME_START", frame=header.frame, worker=worker)
                logger.emit("V_LIGHTPAYLOAD_START", frame=header.frame, worker=worker)
                if header.msg_type != wire.MSG_LIGHT:
                    raise wire.WireError(f"expected light frame, got msg_type {header.msg_type}")
                light = LightPayload.unpack(header.frame, payload)
                logger.emit("V_LIGHTPAYLOAD_END", frame=header.frame, worker=worker)

                heavy_header = wire.FrameHeader.unpack(wire.recv_exact(sock, wire.HEADER.size))
                if heavy_header.msg_type != wire.MSG_HEAVY or heavy_header.frame != header.frame:
                    raise wire.WireError(
                        f"expected heavy frame {header.frame}, got type {heavy_header.msg_type} "
                        f"frame {heavy_header.frame}"
                    )
                logger.emit("V_HEAVYPAYLOAD_START", frame=header.frame, worker=worker)
                payload = wire.recv_exact(sock, heavy_header.payload_len)
                pixels, _geometry = wire.split_heavy_payload(payload)
                logger.emit("V_HEAVYPAYLOAD_END", frame=header.frame, worker=worker)

                server.core.scene.install(worker, light, pixels)
                logger.emit("V_FRAME_END", frame=header.frame, worker=worker)
        except (ConnectionError, OSError, wire.WireError, ValueError):
            # Truncated or malformed stream: drop the connection, keep the
            # slot frozen at the last good frame.
            return
        finally:
            server.connection_closed(worker)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class ViewerServer:
    """Accepts back-end connections and feeds the viewer core."""

    def __init__(self, core: ViewerCore, logger: EventLogger, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        self.logger = logger
        self._server = _Server((host, port), _ReceiverHandler)
        self._server.owner = self
        self._thread: threading.Thread | None = None
        self._conn_lock = threading.Lock()
        self._open_connections = 0
        self._ever_connected = threading.Event()
        self._all_closed = threading.Event()

    @property
    def endpoint(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def register_connection(self, worker: int, sock: socket.socket) -> None:
        with self._conn_lock:
            self._open_connections += 1
            self._ever_connected.set()
            self._all_closed.clear()
        if worker == 0:
            self.core.attach_feedback_channel(sock)

    def connection_closed(self, worker) -> None:
        with self._conn_lock:
            if worker is not None:
                self._open_connections -= 1
                if self._open_connections <= 0:
                    self._all_closed.set()

    def wait_done(self, timeout: float | None = None) -> bool:
        """Wait until at least one back end connected and all disconnected."""
        if not self._ever_connected.wait(timeout=timeout):
            return False
        return self._all_closed.wait(timeout=timeout)

    def start(self) -> "ViewerServer":
        self._thread = threading.Thread(target=lambda: self._server.serve_forever(poll_interval=0.05), name="viewer-recv", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def __enter__(self) -> "ViewerServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class SnapshotWriter:
    """Writes a PNG composite every K scene installs (headless output)."""

    def __init__(self, core: ViewerCore, out_dir, every: int = 1, out_size=(512, 512)):
        import os

        self.core = core
        self.out_dir = out_dir
        self.every = max(1, every)
        self.out_size = out_size
        self.count = 0
        self.written: list[str] = []
        self._lock = threading.Lock()
        os.makedirs(out_dir, exist_ok=True)
        core.scene.add_listener(self._on_install)

    def _on_install(self, worker, light, pixels) -> None:
        import os

        from PIL import Image

        with self._lock:
            self.count += 1
            if self.count % self.every:
                return
            index = len(self.written)
            path = os.path.join(self.out_dir, f"composite_{index:06d}.png")
        image = self.core.composite(self.out_size)
        Image.fromarray((np.clip(image, 0.0, 1.0) * 255).astype(np.uint8), mode="RGBA").save(path)
        with self._lock:
            self.written.append(path)
