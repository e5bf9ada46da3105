"""Back end -> viewer wire protocol (binary, big-endian).

Frame header: magic 0x5649 (u16), msg_type (u8: 1=light, 2=heavy,
3=feedback), worker_index (u16), frame (u32), payload_len (u64), payload.

Light payload:    width u32, height u32, bytes_per_pixel u8, axis u8,
                  12 x f32 placement (4 quad corners in model space).
Heavy payload:    raw premultiplied RGBA pixels, then geometry_len u32
                  (reserved, always 0).
Feedback payload: axis u8, 3 x f32 view direction; sent viewer -> worker 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from corridor.volume import Axis

MAGIC = 0x5649
MSG_LIGHT = 1
MSG_HEAVY = 2
MSG_FEEDBACK = 3

HEADER = struct.Struct(">HBHIQ")
_LIGHT = struct.Struct(">IIBB12f")
_GEOMETRY_LEN = struct.Struct(">I")
_FEEDBACK = struct.Struct(">B3f")


class WireError(RuntimeError):
    """Malformed frame on a viewer connection."""


@dataclass(frozen=True)
class FrameHeader:
    msg_type: int
    worker_index: int
    frame: int
    payload_len: int

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.msg_type, self.worker_index, self.frame, self.payload_len)

    @classmethod
    def unpack(cls, data: bytes) -> "FrameHeader":
        magic, msg_type, worker_index, frame, payload_len = HEADER.unpack(data)
        if magic != MAGIC:
            raise WireError(f"bad frame magic 0x{magic:04x}")
        return cls(msg_type=msg_type, worker_index=worker_index, frame=frame, payload_len=payload_len)


@dataclass(frozen=True)
class LightPayload:
    """Per-frame texture metadata: dimensions plus placement geometry."""

    frame: int
    width: int
    height: int
    bytes_per_pixel: int
    axis: Axis
    placement: tuple[float, ...]  # 4 corners x 3 coords, model space

    def pack(self) -> bytes:
        if len(self.placement) != 12:
            raise WireError(f"placement must have 12 floats, got {len(self.placement)}")
        return _LIGHT.pack(self.width, self.height, self.bytes_per_pixel, int(self.axis), *self.placement)

    @classmethod
    def unpack(cls, frame: int, payload: bytes) -> "LightPayload":
        if len(payload) != _LIGHT.size:
            raise WireError(f"light payload must be {_LIGHT.size} bytes, got {len(payload)}")
        fields = _LIGHT.unpack(payload)
        width, height, bpp, axis = fields[:4]
        return cls(
            frame=frame,
            width=width,
            height=height,
            bytes_per_pixel=bpp,
            axis=Axis(axis),
            placement=tuple(fields[4:]),
        )

    @property
    def placement_array(self) -> np.ndarray:
        return np.array(self.placement, dtype=np.float64).reshape(4, 3)

    @property
    def pixel_bytes(self) -> int:
        return self.width * self.height * self.bytes_per_pixel


def light_from_quad(frame: int, width: int, height: int, axis: Axis, quad: np.ndarray) -> LightPayload:
    return LightPayload(
        frame=frame,
        width=width,
        height=height,
        bytes_per_pixel=4,
        axis=Axis.parse(axis),
        placement=tuple(float(v) for v in np.asarray(quad, dtype=np.float64).reshape(12)),
    )


def pack_light_frame(worker_index: int, light: LightPayload) -> bytes:
    payload = light.pack()
    header = FrameHeader(MSG_LIGHT, worker_index, light.frame, len(payload))
    return header.pack() + payload


def pack_heavy_frame(worker_index: int, frame: int, pixels: bytes) -> bytes:
    payload_len = len(pixels) + _GEOMETRY_LEN.size
    header = FrameHeader(MSG_HEAVY, worker_index, frame, payload_len)
    return header.pack() + pixels + _GEOMETRY_LEN.pack(0)


def split_heavy_payload(payload: bytes) -> tuple[bytes, bytes]:
    """Returns (pixels, geometry); geometry is reserved and empty."""
    if len(payload) < _GEOMETRY_LEN.size:
        raise WireError("heavy payload shorter than its geometry length field")
    (geom_len,) = _GEOMETRY_LEN.unpack_from(payload, len(payload) - _GEOMETRY_LEN.size)
    pixels = payload[: len(payload) - _GEOMETRY_LEN.size]
    if geom_len != 0:
        if geom_len > len(pixels):
            raise WireError(f"geometry length {geom_len} exceeds payload")
        return pixels[: len(pixels) - geom_len], pixels[len(pixels) - geom_len :]
    return pixels, b""


@dataclass(frozen=True)
class FeedbackMessage:
    """Axis choice pushed upstream by the viewer."""

    axis: Axis
    view_direction: tuple[float, float, float]
    frame: int = 0

    def pack_frame(self) -> bytes:
        payload = _FEEDBACK.pack(int(self.axis), *self.view_direction)
        header = FrameHeader(MSG_FEEDBACK, 0, self.frame, len(payload))
        return header.pack() + payload

    @classmethod
    def unpack(cls, frame: int, payload: bytes) -> "FeedbackMessage":
        if len(payload) != _FEEDBACK.size:
            raise WireError(f"feedback payload must be {_FEEDBACK.size} bytes, got {len(payload)}")
        axis, dx, dy, dz = _FEEDBACK.unpack(payload)
        return cls(axis=Axis(axis), view_direction=(dx, dy, dz), frame=frame)


def recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError(f"connection closed after {len(buf)}/{n} bytes")
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock) -> tuple[FrameHeader, bytes]:
    header = FrameHeader.unpack(recv_exact(sock, HEADER.size))
    if header.payload_len > (1 << 32):
        raise WireError(f"unreasonable payload length {header.payload_len}")
    payload = recv_exact(sock, header.payload_len) if header.payload_len else b""
    return header, payload
