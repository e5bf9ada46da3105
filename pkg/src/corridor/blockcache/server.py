"""Block store server daemon.

Each server owns the blocks whose index maps to it under the b mod S
placement rule; it never needs to know S.  Blocks are stored padded to the
configured block size, one file per block, under
``data_dir/<dataset_id>/<block>.blk``.  The catalog (name -> entry) is
replicated to every server at ingest time and persisted as JSON.
"""

from __future__ import annotations

import json
import os
import socketserver
import threading
import time
from dataclasses import dataclass

from corridor.blockcache import protocol
from corridor.blockcache.protocol import (
    CATALOG_BLOCK,
    MSG_BLOCK_GET,
    MSG_CATALOG_LOOKUP,
    MSG_ERROR,
    MSG_INGEST_PUT,
)

CATALOG_FILE = "catalog.json"


@dataclass
class AccessEntry:
    msg_type: int
    dataset_id: int
    block_index: int
    t: float


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        store = self.server.store
        sock = self.request
        try:
            while True:
                try:
                    req = protocol.read_request(sock)
                except ConnectionError:
                    return
                store.record_access(req)
                if req.msg_type == MSG_CATALOG_LOOKUP:
                    name = protocol.read_name(sock)
                    store.handle_lookup(sock, name)
                elif req.msg_type == MSG_BLOCK_GET:
                    store.handle_block_get(sock, req)
                elif req.msg_type == MSG_INGEST_PUT:
                    payload = protocol.recv_exact(sock, req.count)
                    store.handle_put(sock, req, payload)
                else:
                    sock.sendall(protocol.pack_response(MSG_ERROR, 0, f"unknown msg_type {req.msg_type}".encode()))
                    return
        except (protocol.ProtocolError, ConnectionError, OSError):
            return


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class CacheServer:
    """One stripe of the block store.

    `delay_s` artificially delays every response; used to verify that read
    results are independent of per-server response arrival order.
    """

    def __init__(self, data_dir, host: str = "127.0.0.1", port: int = 0, delay_s: float = 0.0):
        self.data_dir = str(data_dir)
        os.makedirs(self.data_dir, exist_ok=True)
        self.delay_s = delay_s
        self._lock = threading.Lock()
        self.catalog: dict[str, dict] = {}
        self.access_log: list[AccessEntry] = []
        self._load_catalog()
        self._server = _Server((host, port), _Handler)
        self._server.store = self
        self._thread: threading.Thread | None = None

    # -- lifecycle -------------------------------------------------------

    @property
    def endpoint(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "CacheServer":
        self._thread = threading.Thread(target=lambda: self._server.serve_forever(poll_interval=0.05), name=f"cached:{self.port}", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def __enter__(self) -> "CacheServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- storage ---------------------------------------------------------

    def _catalog_path(self) -> str:
        return os.path.join(self.data_dir, CATALOG_FILE)

    def _load_catalog(self) -> None:
        path = self._catalog_path()
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                self.catalog = json.load(fh)

    def _persist_catalog(self) -> None:
        path = self._catalog_path()
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.catalog, fh)
        os.replace(tmp, path)

    def _block_path(self, dataset_id: int, block_index: int) -> str:
        return os.path.join(self.data_dir, f"{dataset_id:08x}", f"{block_index:010d}.blk")

    def record_access(self, req: protocol.Request) -> None:
        with self._lock:
            self.access_log.append(
                AccessEntry(req.msg_type, req.dataset_id, req.block_index, time.monotonic())
            )

    def block_accesses(self) -> list[int]:
        """Block indices served via block-get, in receipt order."""
        with self._lock:
            return [a.block_index for a in self.access_log if a.msg_type == MSG_BLOCK_GET]

    # -- request handling --------------------------------------------------

    def _respond(self, sock, data: bytes) -> None:
        if self.delay_s > 0:
            time.sleep(self.delay_s)
        sock.sendall(data)

    def handle_lookup(self, sock, name: str) -> None:
        with self._lock:
            entry = self.catalog.get(name)
        if entry is None:
            self._respond(sock, protocol.pack_response(MSG_ERROR, 0, f"not found: {name}".encode()))
            return
        payload = protocol.pack_entry(
            entry["dataset_id"], entry["block_size"], entry["total_bytes"], entry["block_count"], name
        )
        self._respond(sock, protocol.pack_response(MSG_CATALOG_LOOKUP, 0, payload))

    def handle_block_get(self, sock, req: protocol.Request) -> None:
        count = max(1, req.count)
        for i in range(count):
            index = req.block_index + i
            path = self._block_path(req.dataset_id, index)
            if not os.path.exists(path):
                self._respond(
                    sock,
                    protocol.pack_response(MSG_ERROR, index, f"no block {index} of dataset {req.dataset_id}".encode()),
                )
                return
            with open(path, "rb") as fh:
                payload = fh.read()
            self._respond(sock, protocol.pack_response(MSG_BLOCK_GET, index, payload))

    def handle_put(self, sock, req: protocol.Request, payload: bytes) -> None:
        if req.block_index == CATALOG_BLOCK:
            dataset_id, block_size, total_bytes, block_count, name = protocol.unpack_entry(payload)
            with self._lock:
                existing = self.catalog.get(name)
                if existing is not None and existing["dataset_id"] != dataset_id:
                    self._respond(
                        sock, protocol.pack_response(MSG_ERROR, CATALOG_BLOCK, f"id clash for {name}".encode())
                    )
                    return
                clash = [n for n, e in self.catalog.items() if e["dataset_id"] == dataset_id and n != name]
                if clash:
                    self._respond(
                        sock,
                        protocol.pack_response(
                            MSG_ERROR, CATALOG_BLOCK, f"dataset id 0x{dataset_id:08x} already maps to {clash[0]}".encode()
                        ),
                    )
                    return
                self.catalog[name] = {
                    "dataset_id": dataset_id,
                    "block_size": block_size,
                    "total_bytes": total_bytes,
                    "block_count": block_count,
                }
                self._persist_catalog()
            self._respond(sock, protocol.pack_response(MSG_INGEST_PUT, CATALOG_BLOCK, b""))
            return

        path = self._block_path(req.dataset_id, req.block_index)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(payload)
        self._respond(sock, protocol.pack_response(MSG_INGEST_PUT, req.block_index, b""))
