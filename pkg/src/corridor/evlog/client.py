"""Emitter side of the event log: loggers and record sinks.

`EventLogger.emit` never blocks the caller beyond a bounded enqueue: the
collector sink hands records to a sender thread through a bounded queue
and falls back to a local spool file when the collector is unreachable
or the queue is full.
"""

from __future__ import annotations

import queue
import socket
import threading
import time

from corridor.evlog.records import EventRecord, serialize_record


class MemorySink:
    """Collects records in memory; handy for in-process runs and tests."""

    def __init__(self):
        self._lock = threading.Lock()
        self.records: list[EventRecord] = []

    def write(self, rec: EventRecord) -> None:
        with self._lock:
            self.records.append(rec)

    def close(self) -> None:
        pass


class FileSink:
    """Appends records to a local spool file, one line per record."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8")
        self.count = 0

    def write(self, rec: EventRecord) -> None:
        line = serialize_record(rec) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            self.count += 1

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class CollectorSink:
    """Ships records to a collector over TCP, spooling locally on failure."""

    def __init__(self, endpoint: tuple[str, int], spool_path, queue_size: int = 10000):
        self.endpoint = endpoint
        self.spool_path = spool_path
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._spool: FileSink | None = None
        self._spool_lock = threading.Lock()
        self._sock: socket.socket | None = None
        self.failed = False
        self.spooled = 0
        self._thread = threading.Thread(target=self._run, name="evlog-sender", daemon=True)
        self._thread.start()

    def _spool_write(self, rec: EventRecord) -> None:
        with self._spool_lock:
            if self._spool is None:
                self._spool = FileSink(self.spool_path)
            self._spool.write(rec)
            self.spooled += 1

    def _send(self, rec: EventRecord) -> None:
        if self.failed:
            self._spool_write(rec)
            return
        try:
            if self._sock is None:
                self._sock = socket.create_connection(self.endpoint, timeout=5.0)
            self._sock.sendall((serialize_record(rec) + "\n").encode("utf-8"))
        except OSError:
            self.failed = True
            if self._sock is not None:
                try:
                    self._sock.close()
                except OSError:
                    pass
                self._sock = None
            self._spool_write(rec)

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                break
            self._send(item)
            self._queue.task_done()

    def write(self, rec: EventRecord) -> None:
        try:
            self._queue.put_nowait(rec)
        except queue.Full:
            self._spool_write(rec)

    def flush(self) -> None:
        self._queue.join()

    def close(self) -> None:
        self._queue.join()
        self._queue.put(None)
        self._thread.join(timeout=10.0)
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
        with self._spool_lock:
            if self._spool is not None:
                self._spool.close()


class EventLogger:
    """Builds records for one (host, program) emitter and hands them to a sink.

    Timestamps are microseconds since the epoch and are clamped to be
    non-decreasing per emitter.
    """

    def __init__(self, prog: str, sink=None, host: str | None = None):
        self.prog = prog
        self.host = host or socket.gethostname()
        self.sink = sink if sink is not None else MemorySink()
        self._ts_lock = threading.Lock()
        self._last_ts = 0

    def _now_us(self) -> int:
        now = time.time_ns() // 1000
        with self._ts_lock:
            if now < self._last_ts:
                now = self._last_ts
            self._last_ts = now
        return now

    def emit(self, tag: str, frame: int = -1, worker: int = -1, extra: dict | None = None) -> EventRecord:
        rec = EventRecord(
            ts_us=self._now_us(),
            host=self.host,
            prog=self.prog,
            tag=tag,
            frame=frame,
            worker=worker,
            extra={k: str(v) for k, v in (extra or {}).items()},
        )
        self.sink.write(rec)
        return rec

    @property
    def spooled(self) -> int:
        return getattr(self.sink, "spooled", 0)

    @property
    def collector_failed(self) -> bool:
        return bool(getattr(self.sink, "failed", False))

    def flush(self) -> None:
        flush = getattr(self.sink, "flush", None)
        if flush is not None:
            flush()

    def close(self) -> None:
        self.sink.close()
