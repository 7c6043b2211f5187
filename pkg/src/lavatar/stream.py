"""Reference streaming server and headless client.

A session sends the encoded asset exactly once (in 64 KiB chunks), then per
frame either the expression parameters (client-blend) or the already-blended
warp and diffuse maps (server-blend).  The transport is any reliable ordered
byte stream; this module provides TCP endpoints, and the FastAPI service
bridges the identical framed bytes over WebSockets.

Sessions never share mutable state: the server threads read an immutable
asset and per-session sockets only.
"""

from __future__ import annotations

import socket
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import protocol, raster
from .blending import blend_texture_maps, blend_warp_maps, blend_weights, quantize_rgba
from .codec import FramePacket, Pose, decode_asset, decode_frame, encode_frame
from .errors import ProtocolError
from .protocol import MessageKind, MessageReader
from .types import AvatarAsset, Camera, ExpressionParams

__all__ = [
    "SessionStats",
    "FrameEntry",
    "session_messages",
    "validate_hello",
    "AvatarServer",
    "serve",
    "ClientResult",
    "client_session",
    "receive_session",
]

FrameEntry = ExpressionParams | tuple[ExpressionParams, Pose | None]


@dataclass
class SessionStats:
    bytes_sent: int = 0
    bytes_received: int = 0
    frames: int = 0
    asset_bytes: int = 0
    asset_chunks: int = 0
    frame_payload_bytes: list[int] = field(default_factory=list)

    @property
    def mean_frame_payload(self) -> float:
        if not self.frame_payload_bytes:
            return 0.0
        return float(np.mean(self.frame_payload_bytes))


def _iter_frames(frames: Iterable[FrameEntry]):
    for i, entry in enumerate(frames):
        if isinstance(entry, tuple):
            params, pose = entry
        else:
            params, pose = entry, None
        yield i, params, pose


def session_messages(
    asset: AvatarAsset,
    asset_bytes: bytes,
    frames: Iterable[FrameEntry],
    mode: int,
    texframe_codec: int = protocol.CODEC_RAW,
):
    """Yield the framed messages of one complete session, asset first."""
    yield protocol.frame_message(
        MessageKind.HELLO, protocol.pack_hello(protocol.PROTOCOL_VERSION, mode)
    )
    total = max(1, -(-len(asset_bytes) // protocol.ASSET_CHUNK_SIZE))
    for seq in range(total):
        chunk = asset_bytes[seq * protocol.ASSET_CHUNK_SIZE : (seq + 1) * protocol.ASSET_CHUNK_SIZE]
        yield protocol.frame_message(
            MessageKind.ASSET_CHUNK, protocol.pack_asset_chunk(seq, total, chunk)
        )
    for index, params, pose in _iter_frames(frames):
        if mode == protocol.MODE_CLIENT_BLEND:
            payload = encode_frame(FramePacket(frame_index=index, params=params, pose=pose))
            yield protocol.frame_message(MessageKind.FRAME, payload)
        else:
            weights = blend_weights(asset.mapper, params)
            warp = blend_warp_maps(asset.warps, weights.gamma)
            tex = blend_texture_maps(asset.textures, weights.beta)
            texframe = protocol.TexFrame(
                frame_index=index,
                warp_maps=warp,
                rgba_maps=quantize_rgba(tex.rgba),
            )
            yield protocol.frame_message(
                MessageKind.TEXFRAME, protocol.pack_texframe(texframe, texframe_codec)
            )
    yield protocol.frame_message(MessageKind.END)


def validate_hello(kind: MessageKind, payload: bytes, offered_mode: int) -> ProtocolError | None:
    """Check a client HELLO; returns the error to send/raise, or None if valid."""
    if kind is not MessageKind.HELLO:
        return ProtocolError("client did not start with HELLO", code=protocol.ERR_INTERNAL)
    version, mode = protocol.parse_hello(payload)
    if version != protocol.PROTOCOL_VERSION:
        return ProtocolError(f"unsupported protocol version {version}", code=protocol.ERR_VERSION)
    if mode not in (protocol.MODE_CLIENT_BLEND, protocol.MODE_SERVER_BLEND):
        return ProtocolError(f"invalid mode {mode}", code=protocol.ERR_BAD_MODE)
    if mode != offered_mode:
        return ProtocolError(f"session offers mode {offered_mode}", code=protocol.ERR_MODE_UNAVAILABLE)
    return None


def _negotiate(reader: MessageReader, send, offered_mode: int) -> int:
    kind, payload = reader.read_message()
    err = validate_hello(kind, payload, offered_mode)
    if err is not None:
        send(protocol.frame_message(MessageKind.ERROR, protocol.pack_error(err.code, str(err))))
        raise err
    return offered_mode


def serve_connection(
    conn: socket.socket,
    asset: AvatarAsset,
    asset_bytes: bytes,
    frames: Sequence[FrameEntry],
    mode: int,
    texframe_codec: int = protocol.CODEC_RAW,
) -> SessionStats:
    """Run one session over a connected socket; returns its statistics."""
    stats = SessionStats()
    reader = MessageReader(conn.recv)

    def send(frame: bytes):
        conn.sendall(frame)
        stats.bytes_sent += len(frame)

    _negotiate(reader, send, mode)
    for frame in session_messages(asset, asset_bytes, frames, mode, texframe_codec):
        kind = frame[4]
        payload_len = len(frame) - 5
        if kind == MessageKind.ASSET_CHUNK:
            stats.asset_chunks += 1
            stats.asset_bytes += payload_len - 8
        elif kind in (MessageKind.FRAME, MessageKind.TEXFRAME):
            stats.frames += 1
            stats.frame_payload_bytes.append(payload_len)
        send(frame)
    return stats


class AvatarServer:
    """TCP server streaming one asset to any number of concurrent sessions."""

    def __init__(
        self,
        asset: AvatarAsset,
        asset_bytes: bytes,
        frames: Sequence[FrameEntry],
        mode: int = protocol.MODE_CLIENT_BLEND,
        host: str = "127.0.0.1",
        port: int = 0,
        texframe_codec: int = protocol.CODEC_RAW,
    ):
        self._asset = asset
        self._asset_bytes = asset_bytes
        self._frames = list(frames)
        self._mode = mode
        self._codec = texframe_codec
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self._threads: list[threading.Thread] = []
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()
        self._lock = threading.Lock()
        self.session_stats: list[SessionStats] = []
        self.session_errors: list[ProtocolError] = []

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()

    def start(self):
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def _accept_loop(self):
        while not self._stopping.is_set():
            try:
                conn, _addr = self._sock.accept()
            except OSError:
                return
            thread = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _handle(self, conn: socket.socket):
        try:
            stats = serve_connection(
                conn, self._asset, self._asset_bytes, self._frames, self._mode, self._codec
            )
            with self._lock:
                self.session_stats.append(stats)
        except ProtocolError as exc:
            with self._lock:
                self.session_errors.append(exc)
        except OSError:
            pass
        finally:
            conn.close()

    def stop(self):
        self._stopping.set()
        self._sock.close()
        for t in self._threads:
            t.join(timeout=5.0)
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)


def serve(
    asset: AvatarAsset,
    asset_bytes: bytes,
    frames: Sequence[FrameEntry],
    mode: int = protocol.MODE_CLIENT_BLEND,
    host: str = "127.0.0.1",
    port: int = 0,
    sessions: int = 1,
    texframe_codec: int = protocol.CODEC_RAW,
    on_listen: Callable[[tuple[str, int]], None] | None = None,
) -> list[SessionStats]:
    """Listen, serve ``sessions`` connections sequentially, return their stats."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen()
    if on_listen is not None:
        on_listen(sock.getsockname())
    all_stats = []
    try:
        for _ in range(sessions):
            conn, _addr = sock.accept()
            try:
                all_stats.append(
                    serve_connection(conn, asset, asset_bytes, frames, mode, texframe_codec)
                )
            except ProtocolError:
                pass
            finally:
                conn.close()
    finally:
        sock.close()
    return all_stats


@dataclass
class ClientResult:
    asset: AvatarAsset
    images: list[np.ndarray]
    frame_indices: list[int]
    stats: SessionStats
    mode: int


CameraSource = Camera | Callable[[int], Camera]


def _camera_for(source: CameraSource, index: int) -> Camera:
    return source(index) if callable(source) else source


def receive_session(
    reader: MessageReader,
    send: Callable[[bytes], None],
    camera_source: CameraSource,
    options: raster.RenderOptions = raster.RenderOptions(),
    mode: int = protocol.MODE_CLIENT_BLEND,
    frame_sink: Callable[[int, np.ndarray], None] | None = None,
    keep_images: bool = True,
) -> ClientResult:
    """Drive one client session over an abstract framed transport."""
    stats = SessionStats()

    hello = protocol.frame_message(
        MessageKind.HELLO, protocol.pack_hello(protocol.PROTOCOL_VERSION, mode)
    )
    send(hello)
    stats.bytes_sent += len(hello)

    chunks: list[bytes] = []
    total_chunks: int | None = None
    next_seq = 0
    asset: AvatarAsset | None = None
    images: list[np.ndarray] = []
    indices: list[int] = []

    def note(kind, payload):
        stats.bytes_received += 5 + len(payload)

    while True:
        kind, payload = reader.read_message()
        note(kind, payload)
        if kind is MessageKind.ERROR:
            code, text = protocol.parse_error(payload)
            raise ProtocolError(f"server error {code}: {text}", code=code)
        if kind is MessageKind.HELLO:
            version, srv_mode = protocol.parse_hello(payload)
            if version != protocol.PROTOCOL_VERSION:
                raise ProtocolError(f"server speaks version {version}", code=protocol.ERR_VERSION)
            if srv_mode != mode:
                raise ProtocolError(f"server switched to mode {srv_mode}")
            continue
        if kind is MessageKind.ASSET_CHUNK:
            if asset is not None:
                raise ProtocolError("ASSET_CHUNK after the asset completed")
            seq, total, data = protocol.parse_asset_chunk(payload)
            if total_chunks is None:
                total_chunks = total
            elif total != total_chunks:
                raise ProtocolError("ASSET_CHUNK total changed mid-transfer")
            if seq != next_seq:
                raise ProtocolError(f"ASSET_CHUNK out of order at seq {seq}")
            next_seq += 1
            chunks.append(data)
            stats.asset_chunks += 1
            stats.asset_bytes += len(data)
            if next_seq == total_chunks:
                asset = decode_asset(b"".join(chunks))
            continue
        if kind in (MessageKind.FRAME, MessageKind.TEXFRAME):
            if asset is None:
                raise ProtocolError("frame arrived before the asset completed")
            stats.frames += 1
            stats.frame_payload_bytes.append(len(payload))
            if kind is MessageKind.FRAME:
                packet = decode_frame(payload, expected_p=asset.meta.p)
                camera = _camera_for(camera_source, packet.frame_index)
                result = raster.render(asset, packet.params, camera, options)
                index = packet.frame_index
            else:
                tex = protocol.parse_texframe(payload, asset.meta)
                warp, blended = protocol.texframe_to_blended(tex)
                camera = _camera_for(camera_source, tex.frame_index)
                result = raster.render_prebaked(asset, warp, blended, camera, options)
                index = tex.frame_index
            if frame_sink is not None:
                frame_sink(index, result.image)
            if keep_images:
                images.append(result.image)
            indices.append(index)
            continue
        if kind is MessageKind.END:
            break
    if asset is None:
        raise ProtocolError("session ended before the asset completed")
    return ClientResult(asset=asset, images=images, frame_indices=indices, stats=stats, mode=mode)


def client_session(
    address: tuple[str, int],
    camera_source: CameraSource,
    options: raster.RenderOptions = raster.RenderOptions(),
    mode: int = protocol.MODE_CLIENT_BLEND,
    frame_sink: Callable[[int, np.ndarray], None] | None = None,
    keep_images: bool = True,
    timeout: float = 30.0,
) -> ClientResult:
    """Connect to a server, receive the asset, render every streamed frame."""
    with socket.create_connection(address, timeout=timeout) as sock:
        reader = MessageReader(sock.recv)
        return receive_session(
            reader,
            sock.sendall,
            camera_source,
            options=options,
            mode=mode,
            frame_sink=frame_sink,
            keep_images=keep_images,
        )
