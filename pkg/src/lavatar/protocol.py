"""Session message framing for avatar streaming.

Every message is a length-prefixed frame over a reliable ordered byte
stream: ``u32 length | u8 kind | payload`` where length counts the kind byte
plus the payload.  The WebSocket bridge carries exactly these framed bytes,
one frame per binary message.  See PROTOCOL.md for the normative layout.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ProtocolError
from .types import AssetMeta, BlendedTexture

__all__ = [
    "PROTOCOL_VERSION",
    "MODE_CLIENT_BLEND",
    "MODE_SERVER_BLEND",
    "ERR_VERSION",
    "ERR_BAD_MODE",
    "ERR_MODE_UNAVAILABLE",
    "ERR_INTERNAL",
    "MessageKind",
    "TexFrame",
    "frame_message",
    "split_message",
    "pack_hello",
    "parse_hello",
    "pack_asset_chunk",
    "parse_asset_chunk",
    "pack_error",
    "parse_error",
    "pack_texframe",
    "parse_texframe",
    "MessageReader",
    "ASSET_CHUNK_SIZE",
]

PROTOCOL_VERSION = 1
ASSET_CHUNK_SIZE = 64 * 1024

MODE_CLIENT_BLEND = 0
MODE_SERVER_BLEND = 1

ERR_VERSION = 1
ERR_BAD_MODE = 2
ERR_MODE_UNAVAILABLE = 3
ERR_INTERNAL = 4

CODEC_RAW = 0
CODEC_DEFLATE = 1


class MessageKind(IntEnum):
    HELLO = 0
    ASSET_CHUNK = 1
    FRAME = 2
    TEXFRAME = 3
    END = 4
    ERROR = 5


def frame_message(kind: MessageKind, payload: bytes = b"") -> bytes:
    return struct.pack("<IB", 1 + len(payload), int(kind)) + payload


def split_message(frame: bytes) -> tuple[MessageKind, bytes]:
    """Split one complete framed message into (kind, payload)."""
    if len(frame) < 5:
        raise ProtocolError("framed message shorter than its header")
    (length,) = struct.unpack_from("<I", frame, 0)
    if length != len(frame) - 4:
        raise ProtocolError(f"frame length {length} does not match {len(frame) - 4}")
    kind = frame[4]
    try:
        return MessageKind(kind), frame[5:]
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind}") from None


def pack_hello(version: int = PROTOCOL_VERSION, mode: int = MODE_CLIENT_BLEND) -> bytes:
    return struct.pack("<HB", version, mode)


def parse_hello(payload: bytes) -> tuple[int, int]:
    if len(payload) != 3:
        raise ProtocolError("HELLO payload must be 3 bytes")
    version, mode = struct.unpack("<HB", payload)
    return version, mode


def pack_asset_chunk(seq: int, total: int, data: bytes) -> bytes:
    return struct.pack("<II", seq, total) + data


def parse_asset_chunk(payload: bytes) -> tuple[int, int, bytes]:
    if len(payload) < 8:
        raise ProtocolError("ASSET_CHUNK payload truncated")
    seq, total = struct.unpack_from("<II", payload, 0)
    if seq >= total:
        raise ProtocolError(f"ASSET_CHUNK seq {seq} >= total {total}")
    return seq, total, payload[8:]


def pack_error(code: int, message: str) -> bytes:
    return struct.pack("<H", code) + message.encode("utf-8")


def parse_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < 2:
        raise ProtocolError("ERROR payload truncated")
    (code,) = struct.unpack_from("<H", payload, 0)
    return code, payload[2:].decode("utf-8", "replace")


@dataclass(frozen=True)
class TexFrame:
    """Server-blended maps for one frame: warps at 32-bit, diffuse at 8-bit."""

    frame_index: int
    warp_maps: np.ndarray  # (N, rw, rw, 2) float32
    rgba_maps: np.ndarray  # (N, rt, rt, 4) uint8


def pack_texframe(tex: TexFrame, codec_id: int = CODEC_RAW) -> bytes:
    blob = (
        np.ascontiguousarray(tex.warp_maps, dtype="<f4").tobytes()
        + np.ascontiguousarray(tex.rgba_maps, dtype=np.uint8).tobytes()
    )
    if codec_id == CODEC_DEFLATE:
        blob = zlib.compress(blob, 6)
    elif codec_id != CODEC_RAW:
        raise ProtocolError(f"unknown texframe codec {codec_id}")
    return struct.pack("<IB", tex.frame_index, codec_id) + blob


def parse_texframe(payload: bytes, meta: AssetMeta) -> TexFrame:
    if len(payload) < 5:
        raise ProtocolError("TEXFRAME payload truncated")
    frame_index, codec_id = struct.unpack_from("<IB", payload, 0)
    blob = payload[5:]
    if codec_id == CODEC_DEFLATE:
        try:
            blob = zlib.decompress(blob)
        except zlib.error as exc:
            raise ProtocolError(f"TEXFRAME fails to inflate: {exc}") from None
    elif codec_id != CODEC_RAW:
        raise ProtocolError(f"unknown texframe codec {codec_id}")
    n, rw, rt = meta.num_layers, meta.warp_res, meta.tex_res
    warp_bytes = n * rw * rw * 2 * 4
    rgba_bytes = n * rt * rt * 4
    if len(blob) != warp_bytes + rgba_bytes:
        raise ProtocolError(
            f"TEXFRAME blob is {len(blob)} bytes, expected {warp_bytes + rgba_bytes}"
        )
    warp = np.frombuffer(blob, dtype="<f4", count=n * rw * rw * 2).reshape(n, rw, rw, 2)
    rgba = np.frombuffer(blob, dtype=np.uint8, offset=warp_bytes).reshape(n, rt, rt, 4)
    return TexFrame(frame_index=frame_index, warp_maps=warp.copy(), rgba_maps=rgba.copy())


def texframe_to_blended(tex: TexFrame) -> tuple[np.ndarray, BlendedTexture]:
    """Received maps in the form the prebaked renderer consumes."""
    rgba = tex.rgba_maps.astype(np.float32) / np.float32(255.0)
    return tex.warp_maps, BlendedTexture(rgba=rgba, specular=None)


class MessageReader:
    """Incremental parser of framed messages from a byte stream."""

    def __init__(self, recv):
        # recv(n) must return at most n bytes, b"" on EOF.
        self._recv = recv
        self._buf = b""

    def _read_exact(self, n: int) -> bytes:
        parts = [self._buf[:n]]
        got = len(parts[0])
        self._buf = self._buf[n:] if got == n else b""
        while got < n:
            data = self._recv(n - got)
            if not data:
                raise ProtocolError("connection closed mid-message")
            parts.append(data)
            got += len(data)
        return b"".join(parts)

    def read_message(self) -> tuple[MessageKind, bytes]:
        header = self._read_exact(4)
        (length,) = struct.unpack("<I", header)
        if length < 1:
            raise ProtocolError("message length must cover the kind byte")
        body = self._read_exact(length)
        kind = body[0]
        try:
            return MessageKind(kind), body[1:]
        except ValueError:
            raise ProtocolError(f"unknown message kind {kind}") from None
