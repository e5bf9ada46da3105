"""Collector daemon: accepts event lines from many emitters over TCP.

Records are appended to a single log file in arrival order.  Each line is
written under a lock in one call, so concurrent emitters never interleave
within a line.  On disk errors the collector stops accepting and records
the failure.
"""

from __future__ import annotations

import socketserver
import threading


class _CollectorHandler(socketserver.StreamRequestHandler):
    def handle(self):
        collector = self.server.collector
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").rstrip("\n")
            if not line.strip():
                continue
            if not collector.append(line):
                return


class _CollectorServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class Collector:
    """TCP collector writing newline-delimited event records to one file."""

    def __init__(self, path, host: str = "127.0.0.1", port: int = 0):
        self.path = path
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()
        self.error: OSError | None = None
        self.count = 0
        self._server = _CollectorServer((host, port), _CollectorHandler)
        self._server.collector = self
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def append(self, line: str) -> bool:
        """Append one whole line; returns False once the collector has failed."""
        with self._lock:
            if self.error is not None:
                return False
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
                self.count += 1
                return True
            except OSError as exc:
                self.error = exc
                try:
                    self._server.shutdown()
                except RuntimeError:
                    pass
                return False

    def start(self) -> "Collector":
        self._thread = threading.Thread(target=lambda: self._server.serve_forever(poll_interval=0.05), name="evlog-collector", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10.0)
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "Collector":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
