"""Block store wire protocol (binary, big-endian).

Request:  magic 0xD5B1 (u16), msg_type (u8), dataset_id (u32),
          block_index (u64), count (u32), then a type-specific body:
          catalog-lookup carries a length-prefixed UTF-8 name; ingest-put
          carries `count` payload bytes (a catalog entry blob when
          block_index is the catalog sentinel).
Response: magic, msg_type, block_index (u64), payload_len (u32), payload.
          msg_type 0xFF signals an error; the payload is a UTF-8 message.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = 0xD5B1
MSG_CATALOG_LOOKUP = 1
MSG_BLOCK_GET = 2
MSG_INGEST_PUT = 3
MSG_ERROR = 0xFF

# ingest-put with this block index carries the catalog entry for a dataset.
CATALOG_BLOCK = 2**64 - 1

REQUEST = struct.Struct(">HBIQI")
RESPONSE = struct.Struct(">HBQI")
_NAME_LEN = struct.Struct(">I")
_ENTRY = struct.Struct(">IIQQ")


class ProtocolError(RuntimeError):
    """Malformed or unexpected frame on a block store connection."""


@dataclass(frozen=True)
class Request:
    msg_type: int
    dataset_id: int = 0
    block_index: int = 0
    count: int = 0


def pack_request(req: Request) -> bytes:
    return REQUEST.pack(MAGIC, req.msg_type, req.dataset_id, req.block_index, req.count)


def unpack_request(data: bytes) -> Request:
    magic, msg_type, dataset_id, block_index, count = REQUEST.unpack(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad request magic 0x{magic:04x}")
    return Request(msg_type=msg_type, dataset_id=dataset_id, block_index=block_index, count=count)


def pack_response(msg_type: int, block_index: int, payload: bytes) -> bytes:
    return RESPONSE.pack(MAGIC, msg_type, block_index, len(payload)) + payload


def pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return _NAME_LEN.pack(len(raw)) + raw


def pack_entry(dataset_id: int, block_size: int, total_bytes: int, block_count: int, name: str) -> bytes:
    return _ENTRY.pack(dataset_id, block_size, total_bytes, block_count) + pack_name(name)


def unpack_entry(payload: bytes) -> tuple[int, int, int, int, str]:
    dataset_id, block_size, total_bytes, block_count = _ENTRY.unpack_from(payload, 0)
    (name_len,) = _NAME_LEN.unpack_from(payload, _ENTRY.size)
    start = _ENTRY.size + _NAME_LEN.size
    name = payload[start : start + name_len].decode("utf-8")
    return dataset_id, block_size, total_bytes, block_count, name


def recv_exact(sock, n: int) -> bytes:
    """Read exactly n bytes or raise ConnectionError on EOF."""
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError(f"connection closed after {len(buf)}/{n} bytes")
        buf.extend(chunk)
    return bytes(buf)


def read_request(sock) -> Request:
    return unpack_request(recv_exact(sock, REQUEST.size))


def read_name(sock) -> str:
    (length,) = _NAME_LEN.unpack(recv_exact(sock, _NAME_LEN.size))
    if length > 1 << 16:
        raise ProtocolError(f"unreasonable name length {length}")
    return recv_exact(sock, length).decode("utf-8")


def read_response(sock) -> tuple[int, int, bytes]:
    """Returns (msg_type, block_index, payload); raises on error frames."""
    magic, msg_type, block_index, payload_len = RESPONSE.unpack(recv_exact(sock, RESPONSE.size))
    if magic != MAGIC:
        raise ProtocolError(f"bad response magic 0x{magic:04x}")
    payload = recv_exact(sock, payload_len) if payload_len else b""
    return msg_type, block_index, payload
