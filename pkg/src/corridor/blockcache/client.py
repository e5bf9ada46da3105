"""Parallel client for the striped block store.

Block b of a dataset lives on server (b mod S), where the server order is
fixed by `StoreConfig` and identical for every client of a deployment.  A
read fans out to all covered servers concurrently, one pipelined request
stream per server; the first request to each server is released in a
single wave so every involved server sees one request before any server
sees its second.  Handles are not safe for concurrent use by multiple
callers: each worker opens its own.
"""

from __future__ import annotations

import io
import socket
import threading
import time
import zlib
from dataclasses import dataclass, field

from corridor.blockcache import protocol
from corridor.blockcache.protocol import (
    CATALOG_BLOCK,
    MSG_BLOCK_GET,
    MSG_CATALOG_LOOKUP,
    MSG_ERROR,
    MSG_INGEST_PUT,
)

DEFAULT_BLOCK_SIZE = 64 * 1024
_PIPELINE_WINDOW = 32


class CacheError(RuntimeError):
    pass


class NotFoundError(CacheError):
    pass


class OutOfRangeError(CacheError):
    pass


class TransferError(CacheError):
    def __init__(self, endpoint: tuple[str, int], message: str):
        super().__init__(f"server {endpoint[0]}:{endpoint[1]}: {message}")
        self.endpoint = endpoint


class InvalidHandleError(CacheError):
    pass


class IngestError(CacheError):
    pass


@dataclass(frozen=True)
class StoreConfig:
    """Server stripe set and block granularity of one deployment."""

    servers: tuple[tuple[str, int], ...]
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        if not self.servers:
            raise ValueError("need at least one server")
        if self.block_size <= 0:
            raise ValueError("block_size must be positive")
        object.__setattr__(self, "servers", tuple((str(h), int(p)) for h, p in self.servers))

    @property
    def stripe_count(self) -> int:
        return len(self.servers)

    def server_for_block(self, block_index: int) -> int:
        return block_index % self.stripe_count

    @classmethod
    def parse(cls, spec: str, block_size: int = DEFAULT_BLOCK_SIZE) -> "StoreConfig":
        """Parse 'host:port,host:port,...'."""
        servers = []
        for part in spec.split(","):
            host, _, port = part.strip().rpartition(":")
            servers.append((host, int(port)))
        return cls(servers=tuple(servers), block_size=block_size)


@dataclass(frozen=True)
class DatasetEntry:
    dataset_id: int
    name: str
    total_bytes: int
    block_count: int
    block_size: int


def dataset_id_for(name: str) -> int:
    return zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF


def _connect(endpoint: tuple[str, int], timeout: float = 10.0) -> socket.socket:
    try:
        sock = socket.create_connection(endpoint, timeout=timeout)
        sock.settimeout(60.0)
        return sock
    except OSError as exc:
        raise TransferError(endpoint, f"connect failed: {exc}") from exc


def _as_stream(source) -> io.BufferedIOBase:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source))
    if hasattr(source, "read"):
        return source
    return open(source, "rb")


@dataclass
class _ReadTrace:
    sends: list[tuple[int, int, float]] = field(default_factory=list)  # (server, block, t_send)


class CacheHandle:
    """Open dataset with a byte cursor; owns one connection per server."""

    def __init__(self, client: "CacheClient", entry: DatasetEntry, trace: bool = False):
        self._client = client
        self.entry = entry
        self.cursor = 0
        self.closed = False
        self._conns: dict[int, socket.socket] = {}
        self._trace_enabled = trace
        self.last_read_trace: _ReadTrace | None = None

    @property
    def store(self) -> StoreConfig:
        return self._client.store

    def _conn(self, server_index: int) -> socket.socket:
        sock = self._conns.get(server_index)
        if sock is None:
            sock = _connect(self.store.servers[server_index])
            self._conns[server_index] = sock
        return sock

    def _check_open(self) -> None:
        if self.closed:
            raise InvalidHandleError(f"handle for {self.entry.name!r} is closed")

    # -- reads -----------------------------------------------------------

    def _fetch_blocks(self, blocks: list[int]) -> dict[int, bytes]:
        """Fetch the given block indices, pipelined per server.

        Phase 1 sends exactly one request to every involved server, gated
        by a barrier, then each stream pipelines the remainder within a
        bounded window.
        """
        store = self.store
        by_server: dict[int, list[int]] = {}
        for b in sorted(set(blocks)):
            by_server.setdefault(store.server_for_block(b), []).append(b)

        results: dict[int, bytes] = {}
        errors: list[Exception] = []
        lock = threading.Lock()
        barrier = threading.Barrier(len(by_server))
        trace = _ReadTrace() if self._trace_enabled else None

        def run(server_index: int, wanted: list[int]) -> None:
            try:
                sock = self._conn(server_index)
                sent = 0
                received = 0

                def send_one() -> None:
                    nonlocal sent
                    block = wanted[sent]
                    req = protocol.Request(
                        msg_type=MSG_BLOCK_GET,
                        dataset_id=self.entry.dataset_id,
                        block_index=block,
                        count=1,
                    )
                    if trace is not None:
                        with lock:
                            trace.sends.append((server_index, block, time.monotonic()))
                    sock.sendall(protocol.pack_request(req))
                    sent += 1

                send_one()
                barrier.wait()
                while received < len(wanted):
                    while sent < len(wanted) and sent - received < _PIPELINE_WINDOW:
                        send_one()
                    msg_type, block_index, payload = protocol.read_response(sock)
                    if msg_type == MSG_ERROR:
                        raise TransferError(store.servers[server_index], payload.decode("utf-8", "replace"))
                    if msg_type != MSG_BLOCK_GET or block_index != wanted[received]:
                        raise TransferError(
                            store.servers[server_index],
                            f"unexpected response type={msg_type} block={block_index}",
                        )
                    with lock:
                        results[block_index] = payload
                    received += 1
            except Exception as exc:  # noqa: BLE001 - reported to the caller
                barrier.abort()
                if isinstance(exc, (ConnectionError, OSError)) and not isinstance(exc, CacheError):
                    exc = TransferError(store.servers[server_index], str(exc))
                with lock:
                    errors.append(exc)

        threads = [
            threading.Thread(target=run, args=(s, blocks_s), name=f"cache-read-{s}", daemon=True)
            for s, blocks_s in by_server.items()
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if trace is not None:
            self.last_read_trace = trace
        if errors:
            # Prefer the root cause over secondary broken-barrier noise.
            for exc in errors:
                if isinstance(exc, CacheError):
                    raise exc
            raise errors[0]
        return results

    def readv(self, runs: list[tuple[int, int]]) -> list[bytes]:
        """Read multiple (offset, length) ranges in one batched fetch.

        The union of covering blocks is fetched exactly once, then sliced
        per run, so results do not depend on response arrival order.
        """
        self._check_open()
        bs = self.entry.block_size
        total = self.entry.total_bytes
        needed: set[int] = set()
        for offset, length in runs:
            if offset < 0 or length < 0 or offset + length > total:
                raise OutOfRangeError(
                    f"range [{offset}, {offset + length}) outside dataset of {total} bytes"
                )
            if length:
                needed.update(range(offset // bs, (offset + length - 1) // bs + 1))
        blocks = self._fetch_blocks(sorted(needed)) if needed else {}
        out: list[bytes] = []
        for offset, length in runs:
            if length == 0:
                out.append(b"")
                continue
            buf = bytearray(length)
            b0 = offset // bs
            b1 = (offset + length - 1) // bs
            for b in range(b0, b1 + 1):
                payload = blocks[b]
                if len(payload) != bs:
                    raise TransferError(
                        self.store.servers[self.store.server_for_block(b)],
                        f"block {b}: expected {bs} bytes, got {len(payload)}",
                    )
                lo = max(offset, b * bs)
                hi = min(offset + length, (b + 1) * bs)
                buf[lo - offset : hi - offset] = payload[lo - b * bs : hi - b * bs]
            out.append(bytes(buf))
        return out

    def read(self, offset: int, length: int) -> bytes:
        """Read [offset, offset+length); the cursor moves to the range end."""
        data = self.readv([(offset, length)])[0]
        self.cursor = offset + length
        return data

    def read_seq(self, length: int) -> bytes:
        """Read `length` bytes from the cursor."""
        return self.read(self.cursor, length)

    def seek(self, offset: int) -> "CacheHandle":
        self._check_open()
        if offset < 0 or offset > self.entry.total_bytes:
            raise OutOfRangeError(f"seek to {offset} outside [0, {self.entry.total_bytes}]")
        self.cursor = offset
        return self

    def close(self) -> None:
        for sock in self._conns.values():
            try:
                sock.close()
            except OSError:
                pass
        self._conns.clear()
        self.closed = True

    def __enter__(self) -> "CacheHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class CacheClient:
    """File-like access to datasets striped over a server set."""

    def __init__(self, store: StoreConfig):
        self.store = store

    # -- ingest ------------------------------------------------------------

    def ingest(self, name: str, source) -> DatasetEntry:
        """Load a byte source into the store.

        Block b goes to server (b mod S); blocks are padded to the block
        size on disk.  The catalog entry is committed to every server only
        after all blocks are stored, so an unreachable server fails the
        ingest with no partial catalog entry anywhere.
        """
        store = self.store
        bs = store.block_size
        dataset_id = dataset_id_for(name)

        conns: list[socket.socket] = []
        try:
            try:
                conns = [_connect(ep) for ep in store.servers]
            except TransferError as exc:
                raise IngestError(f"ingest {name!r} aborted: {exc}") from exc

            stream = _as_stream(source)
            total = 0
            block_index = 0
            inflight: list[list[int]] = [[] for _ in conns]

            def drain(server: int, down_to: int) -> None:
                while len(inflight[server]) > down_to:
                    msg_type, block, _payload = protocol.read_response(conns[server])
                    if msg_type == MSG_ERROR:
                        raise TransferError(store.servers[server], _payload.decode("utf-8", "replace"))
                    inflight[server].remove(block)

            try:
                while True:
                    chunk = stream.read(bs)
                    if not chunk:
                        break
                    total += len(chunk)
                    if len(chunk) < bs:
                        chunk = chunk + b"\x00" * (bs - len(chunk))
                    server = store.server_for_block(block_index)
                    req = protocol.Request(
                        msg_type=MSG_INGEST_PUT,
                        dataset_id=dataset_id,
                        block_index=block_index,
                        count=len(chunk),
                    )
                    drain(server, _PIPELINE_WINDOW - 1)
                    conns[server].sendall(protocol.pack_request(req) + chunk)
                    inflight[server].append(block_index)
                    block_index += 1
                for server in range(len(conns)):
                    drain(server, 0)
            except (TransferError, ConnectionError, OSError) as exc:
                raise IngestError(f"ingest {name!r} aborted before catalog commit: {exc}") from exc
            finally:
                if hasattr(source, "read") is False and hasattr(stream, "close"):
                    stream.close()

            block_count = block_index
            entry_blob = protocol.pack_entry(dataset_id, bs, total, block_count, name)
            committed = []
            try:
                for server, conn in enumerate(conns):
                    req = protocol.Request(
                        msg_type=MSG_INGEST_PUT,
                        dataset_id=dataset_id,
                        block_index=CATALOG_BLOCK,
                        count=len(entry_blob),
                    )
                    conn.sendall(protocol.pack_request(req) + entry_blob)
                    msg_type, _block, payload = protocol.read_response(conn)
                    if msg_type == MSG_ERROR:
                        raise TransferError(store.servers[server], payload.decode("utf-8", "replace"))
                    committed.append(server)
            except (TransferError, ConnectionError, OSError) as exc:
                raise IngestError(
                    f"ingest {name!r}: catalog commit failed after servers {committed}: {exc}"
                ) from exc

            return DatasetEntry(
                dataset_id=dataset_id, name=name, total_bytes=total, block_count=block_count, block_size=bs
            )
        finally:
            for conn in conns:
                try:
                    conn.close()
                except OSError:
                    pass

    # -- open/lookup ---------------------------------------------------------

    def lookup(self, name: str) -> DatasetEntry:
        sock = _connect(self.store.servers[0])
        try:
            req = protocol.Request(msg_type=MSG_CATALOG_LOOKUP)
            sock.sendall(protocol.pack_request(req) + protocol.pack_name(name))
            msg_type, _block, payload = protocol.read_response(sock)
            if msg_type == MSG_ERROR:
                raise NotFoundError(payload.decode("utf-8", "replace"))
            dataset_id, block_size, total_bytes, block_count, wire_name = protocol.unpack_entry(payload)
            if wire_name != name:
                raise CacheError(f"catalog returned entry for {wire_name!r}, asked for {name!r}")
            if block_size != self.store.block_size:
                raise CacheError(
                    f"dataset {name!r} was ingested with block_size {block_size}, "
                    f"client configured with {self.store.block_size}"
                )
            return DatasetEntry(
                dataset_id=dataset_id,
                name=name,
                total_bytes=total_bytes,
                block_count=block_count,
                block_size=block_size,
            )
        finally:
            sock.close()

    def open(self, name: str, trace: bool = False) -> CacheHandle:
        return CacheHandle(self, self.lookup(name), trace=trace)
