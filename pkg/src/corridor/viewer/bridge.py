"""UI bridge: static asset serving plus a websocket push channel.

Per scene change the bridge pushes a JSON text frame
``{frame, worker, width, height, axis, placement}`` followed by one
binary frame of raw texture bytes, and accepts ``{type: "view", m: [9
floats]}`` orientation updates.  The websocket layer is a minimal RFC
6455 server: client frames must be masked, server frames are not;
fragmentation is not supported.
"""

from __future__ import annotations

import base64
import hashlib
import json
import mimetypes
import os
import queue
import socketserver
import struct
import threading

from corridor.viewer.receiver import ViewerCore

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

FALLBACK_PAGE = b"""<!doctype html>
<html><head><title>viewer bridge</title></head>
<body><h1>viewer bridge</h1>
<p>No UI assets are built; the websocket endpoint is at <code>/ws</code>.</p>
</body></html>
"""


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("websocket peer closed")
        buf.extend(chunk)
    return bytes(buf)


def ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    header = bytearray([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        header.append(mask_bit | length)
    elif length < (1 << 16):
        header.append(mask_bit | 126)
        header.extend(struct.pack(">H", length))
    else:
        header.append(mask_bit | 127)
        header.extend(struct.pack(">Q", length))
    if mask:
        key = os.urandom(4)
        header.extend(key)
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


def ws_decode(sock) -> tuple[int, bytes]:
    """Read one complete frame; returns (opcode, payload)."""
    b1, b2 = _recv_exact(sock, 2)
    if not b1 & 0x80:
        raise ValueError("fragmented websocket frames are not supported")
    opcode = b1 & 0x0F
    masked = bool(b2 & 0x80)
    length = b2 & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _recv_exact(sock, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _recv_exact(sock, 8))
    key = _recv_exact(sock, 4) if masked else None
    payload = _recv_exact(sock, length) if length else b""
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class _BridgeHandler(socketserver.StreamRequestHandler):
    def handle(self):
        bridge: UiBridge = self.server.bridge
        request_line = self.rfile.readline(8192).decode("latin-1").strip()
        if not request_line:
            return
        parts = request_line.split()
        if len(parts) != 3 or parts[0] != "GET":
            self._plain_response(405, b"only GET is supported")
            return
        path = parts[1].split("?", 1)[0]
        headers = {}
        while True:
            line = self.rfile.readline(8192).decode("latin-1")
            if line in ("\r\n", "\n", ""):
                break
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()

        if path == "/ws":
            if headers.get("upgrade", "").lower() != "websocket" or "sec-websocket-key" not in headers:
                self._plain_response(400, b"expected websocket upgrade")
                return
            self._handshake(headers["sec-websocket-key"])
            bridge.serve_client(self.connection)
        else:
            self._serve_static(bridge, path)

    def _handshake(self, key: str) -> None:
        accept = ws_accept_key(key)
        self.wfile.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("latin-1")
        )
        self.wfile.flush()

    def _plain_response(self, status: int, body: bytes, content_type: str = "text/plain") -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}.get(status, "?")
        self.wfile.write(
            (
                f"HTTP/1.1 {status} {reason}\r\n"
                f"Content-Type: {content_type}\r\n"
                f"Content-Length: {len(body)}\r\n"
                "Connection: close\r\n\r\n"
            ).encode("latin-1")
        )
        self.wfile.write(body)

    def _serve_static(self, bridge: "UiBridge", path: str) -> None:
        if path == "/":
            path = "/index.html"
        asset_dir = bridge.asset_dir
        if asset_dir is None:
            if path == "/index.html":
                self._plain_response(200, FALLBACK_PAGE, "text/html")
            else:
                self._plain_response(404, b"no assets configured")
            return
        full = os.path.normpath(os.path.join(asset_dir, path.lstrip("/")))
        if not full.startswith(os.path.abspath(asset_dir)) or not os.path.isfile(full):
            self._plain_response(404, b"not found")
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            self._plain_response(200, fh.read(), ctype)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class UiBridge:
    """Websocket fan-out of scene changes plus static asset serving."""

    def __init__(self, core: ViewerCore, host: str = "127.0.0.1", port: int = 0, asset_dir=None):
        self.core = core
        self.asset_dir = os.path.abspath(asset_dir) if asset_dir else None
        self._server = _Server((host, port), _BridgeHandler)
        self._server.bridge = self
        self._thread: threading.Thread | None = None
        self._clients_lock = threading.Lock()
        self._clients: list[queue.Queue] = []
        core.scene.add_listener(self._on_install)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def _on_install(self, worker, light, pixels) -> None:
        item = (worker, light, pixels)
        with self._clients_lock:
            clients = list(self._clients)
        for q in clients:
            try:
                q.put_nowait(item)
            except queue.Full:
                try:  # drop the oldest update to keep the stream live
                    q.get_nowait()
                    q.put_nowait(item)
                except (queue.Empty, queue.Full):
                    pass

    @staticmethod
    def _layer_messages(worker, light, pixels) -> tuple[bytes, bytes]:
        header = json.dumps(
            {
                "frame": light.frame,
                "worker": worker,
                "width": light.width,
                "height": light.height,
                "axis": light.axis.name,
                "placement": list(light.placement),
            }
        ).encode("utf-8")
        return ws_encode(OP_TEXT, header), ws_encode(OP_BINARY, pixels)

    def serve_client(self, sock) -> None:
        updates: queue.Queue = queue.Queue(maxsize=256)
        with self._clients_lock:
            self._clients.append(updates)
        send_lock = threading.Lock()
        alive = threading.Event()
        alive.set()

        def push(worker, light, pixels):
            head, body = self._layer_messages(worker, light, pixels)
            with send_lock:
                sock.sendall(head)
                sock.sendall(body)

        def writer():
            try:
                while alive.is_set():
                    try:
                        item = updates.get(timeout=0.25)
                    except queue.Empty:
                        continue
                    push(*item)
            except OSError:
                alive.clear()

        # Replay current slots so a (re)connecting client gets a full refresh.
        from corridor.raycast import quantize

        for worker in range(self.core.scene.workers):
            slot = self.core.scene.slot(worker)
            if slot is not None:
                light, texture = slot
                try:
                    push(worker, light, quantize(texture).tobytes())
                except OSError:
                    pass

        thread = threading.Thread(target=writer, name="bridge-writer", daemon=True)
        thread.start()
        try:
            while alive.is_set():
                opcode, payload = ws_decode(sock)
                if opcode == OP_CLOSE:
                    with send_lock:
                        sock.sendall(ws_encode(OP_CLOSE, payload[:2]))
                    break
                if opcode == OP_PING:
                    with send_lock:
                        sock.sendall(ws_encode(OP_PONG, payload))
                    continue
                if opcode != OP_TEXT:
                    continue
                try:
                    message = json.loads(payload.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    continue
                if message.get("type") == "view" and isinstance(message.get("m"), list) and len(message["m"]) == 9:
                    try:
                        m = [[float(message["m"][r * 3 + c]) for c in range(3)] for r in range(3)]
                        self.core.update_view(m)
                    except ValueError:
                        continue
        except (ConnectionError, OSError, ValueError):
            pass
        finally:
            alive.clear()
            with self._clients_lock:
                if updates in self._clients:
                    self._clients.remove(updates)
            thread.join(timeout=2.0)
            try:
                sock.close()
            except OSError:
                pass

    def start(self) -> "UiBridge":
        self._thread = threading.Thread(target=lambda: self._server.serve_forever(poll_interval=0.05), name="ui-bridge", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def __enter__(self) -> "UiBridge":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
