"""Binary container for avatar assets and the per-frame wire packet.

Container layout (little-endian, documented bit-exactly in FORMAT.md):

    magic "LAVA" | u16 version | u16 flags | u32 chunk_count
    chunk table: chunk_count x (4s id, u64 offset, u64 length)
    chunk payloads, contiguous, in table order

Flags: bit 0 = specular chunk present, bit 1 = per-chunk deflate.  Chunks:
META (dims + scene center), MESH (per layer: counts, f32 positions/UVs, u32
indices), WARP (f32 offsets), TDIF (u8 RGBA), TSPC (f16 SH coefficients,
optional), BLND (f32 blend matrices).  Geometry and matrices are stored at
32-bit precision; in-memory float64 values are quantized once on encode.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ChunkTableError,
    DimensionError,
    PacketError,
    TruncatedChunkError,
    VersionError,
)
from .sh import NUM_SPEC_COEFFS
from .types import (
    AssetMeta,
    AvatarAsset,
    BlendMapper,
    ExpressionParams,
    LayeredMesh,
    MeshLayer,
    TextureAtlas,
    WarpAtlas,
)

__all__ = [
    "MAGIC",
    "CONTAINER_VERSION",
    "FLAG_SPECULAR",
    "FLAG_DEFLATE",
    "encode_asset",
    "decode_asset",
    "inspect_container",
    "FramePacket",
    "Pose",
    "encode_frame",
    "decode_frame",
]

MAGIC = b"LAVA"
CONTAINER_VERSION = 1
FLAG_SPECULAR = 0x0001
FLAG_DEFLATE = 0x0002

_HEADER = struct.Struct("<4sHHI")
_TABLE_ENTRY = struct.Struct("<4sQQ")
_META = struct.Struct("<8I3f")


# ---------------------------------------------------------------------------
# Asset container
# ---------------------------------------------------------------------------


def _meta_payload(meta: AssetMeta) -> bytes:
    return _META.pack(
        meta.num_layers,
        meta.num_warps,
        meta.num_textures,
        meta.p,
        meta.grid_res[0],
        meta.grid_res[1],
        meta.tex_res,
        meta.warp_res,
        *np.asarray(meta.scene_center, dtype=np.float32),
    )


def _mesh_payload(mesh: LayeredMesh) -> bytes:
    parts = []
    for lay in mesh.layers:
        v = lay.num_vertices
        f = lay.triangles.shape[0]
        parts.append(struct.pack("<I", v))
        parts.append(np.ascontiguousarray(lay.positions, dtype=np.float32).tobytes())
        parts.append(np.ascontiguousarray(lay.canonical_uv, dtype=np.float32).tobytes())
        parts.append(struct.pack("<I", f))
        parts.append(np.ascontiguousarray(lay.triangles, dtype=np.uint32).tobytes())
    return b"".join(parts)


def encode_asset(asset: AvatarAsset, deflate: bool = False) -> bytes:
    """Serialize an asset; identical inputs produce identical bytes."""
    meta = asset.meta
    flags = 0
    if asset.textures.has_specular:
        flags |= FLAG_SPECULAR
    if deflate:
        flags |= FLAG_DEFLATE

    chunks: list[tuple[bytes, bytes]] = [
        (b"META", _meta_payload(meta)),
        (b"MESH", _mesh_payload(asset.mesh)),
        (b"WARP", np.ascontiguousarray(asset.warps.maps, dtype=np.float32).tobytes()),
        (b"TDIF", np.ascontiguousarray(asset.textures.rgba).tobytes()),
    ]
    if asset.textures.has_specular:
        chunks.append((b"TSPC", np.ascontiguousarray(asset.textures.specular).tobytes()))
    blnd = (
        np.ascontiguousarray(asset.mapper.warp_matrix, dtype=np.float32).tobytes()
        + np.ascontiguousarray(asset.mapper.tex_matrix, dtype=np.float32).tobytes()
    )
    chunks.append((b"BLND", blnd))

    if deflate:
        chunks = [(cid, zlib.compress(data, 6)) for cid, data in chunks]

    header_size = _HEADER.size + len(chunks) * _TABLE_ENTRY.size
    out = [_HEADER.pack(MAGIC, CONTAINER_VERSION, flags, len(chunks))]
    offset = header_size
    for cid, data in chunks:
        out.append(_TABLE_ENTRY.pack(cid, offset, len(data)))
        offset += len(data)
    out.extend(data for _, data in chunks)
    return b"".join(out)


def _parse_table(buf: bytes) -> tuple[int, dict[bytes, bytes]]:
    if len(buf) < _HEADER.size:
        raise TruncatedChunkError("file shorter than the container header", chunk="header")
    magic, version, flags, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != CONTAINER_VERSION:
        raise VersionError(f"unsupported container version {version}")
    table_end = _HEADER.size + count * _TABLE_ENTRY.size
    if len(buf) < table_end:
        raise ChunkTableError("chunk table extends past end of file")

    entries = []
    for i in range(count):
        cid, off, length = _TABLE_ENTRY.unpack_from(buf, _HEADER.size + i * _TABLE_ENTRY.size)
        entries.append((cid, off, length))

    seen: dict[bytes, bytes] = {}
    spans = []
    for cid, off, length in entries:
        name = cid.decode("ascii", "replace")
        if off < table_end or off + length > len(buf):
            raise ChunkTableError(f"chunk {name} is out of bounds", chunk=name)
        if cid in seen:
            raise ChunkTableError(f"duplicate chunk {name}", chunk=name)
        spans.append((off, off + length, name))
        seen[cid] = buf[off : off + length]
    spans.sort()
    for (s0, e0, n0), (s1, _e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise ChunkTableError(f"chunks {n0} and {n1} overlap", chunk=n1)
    return flags, seen


def _get_chunk(chunks: dict[bytes, bytes], cid: bytes, deflate: bool) -> bytes:
    name = cid.decode("ascii")
    if cid not in chunks:
        raise ChunkTableError(f"required chunk {name} is missing", chunk=name)
    data = chunks[cid]
    if deflate:
        try:
            data = zlib.decompress(data)
        except zlib.error as exc:
            raise TruncatedChunkError(f"chunk {name} fails to inflate: {exc}", chunk=name) from None
    return data


def _expect_size(name: str, data: bytes, expected: int) -> None:
    if len(data) < expected:
        raise TruncatedChunkError(
            f"chunk {name} holds {len(data)} bytes, expected {expected}", chunk=name
        )
    if len(data) > expected:
        raise DimensionError(
            f"chunk {name} holds {len(data)} bytes, expected {expected}", chunk=name
        )


def decode_asset(buf: bytes) -> AvatarAsset:
    """Parse a container, validating the table and every declared dimension."""
    flags, chunks = _parse_table(buf)
    deflate = bool(flags & FLAG_DEFLATE)
    has_spec = bool(flags & FLAG_SPECULAR)

    meta_raw = _get_chunk(chunks, b"META", deflate)
    _expect_size("META", meta_raw, _META.size)
    n, w, t, p, grid_r, grid_c, tex_res, warp_res, cx, cy, cz = _META.unpack(meta_raw)
    if min(n, w, t, grid_r, grid_c, tex_res, warp_res) < 1 or p < 0:
        raise DimensionError("META declares non-positive dimensions", chunk="META")

    mesh_raw = _get_chunk(chunks, b"MESH", deflate)
    layers = []
    pos_off = 0
    first_counts = None
    for li in range(n):
        if pos_off + 4 > len(mesh_raw):
            raise TruncatedChunkError(f"MESH ends inside layer {li}", chunk="MESH")
        (vcount,) = struct.unpack_from("<I", mesh_raw, pos_off)
        pos_off += 4
        need = vcount * 3 * 4 + vcount * 2 * 4
        if pos_off + need + 4 > len(mesh_raw):
            raise TruncatedChunkError(f"MESH ends inside layer {li}", chunk="MESH")
        positions = np.frombuffer(mesh_raw, dtype="<f4", count=vcount * 3, offset=pos_off)
        pos_off += vcount * 12
        uv = np.frombuffer(mesh_raw, dtype="<f4", count=vcount * 2, offset=pos_off)
        pos_off += vcount * 8
        (fcount,) = struct.unpack_from("<I", mesh_raw, pos_off)
        pos_off += 4
        if pos_off + fcount * 12 > len(mesh_raw):
            raise TruncatedChunkError(f"MESH ends inside layer {li}", chunk="MESH")
        tris = np.frombuffer(mesh_raw, dtype="<u4", count=fcount * 3, offset=pos_off)
        pos_off += fcount * 12
        if first_counts is None:
            first_counts = (vcount, fcount)
        try:
            layers.append(
                MeshLayer(
                    positions=positions.astype(np.float64).reshape(vcount, 3),
                    canonical_uv=uv.astype(np.float64).reshape(vcount, 2),
                    triangles=tris.reshape(fcount, 3).copy(),
                )
            )
        except ValueError as exc:
            raise DimensionError(f"MESH layer {li}: {exc}", chunk="MESH") from None
    if pos_off != len(mesh_raw):
        raise DimensionError(
            f"MESH has {len(mesh_raw) - pos_off} trailing bytes", chunk="MESH"
        )
    center = np.array([cx, cy, cz], dtype=np.float64)
    vcount0 = first_counts[0] if first_counts else 0
    lattice = None
    if vcount0 == grid_r * grid_c:
        lattice = np.arange(vcount0, dtype=np.uint32)
    try:
        mesh = LayeredMesh(
            grid_res=(grid_r, grid_c), layers=tuple(layers), center=center, lattice_ids=lattice
        )
    except ValueError as exc:
        raise DimensionError(f"MESH: {exc}", chunk="MESH") from None

    warp_raw = _get_chunk(chunks, b"WARP", deflate)
    _expect_size("WARP", warp_raw, n * w * warp_res * warp_res * 2 * 4)
    warp_maps = (
        np.frombuffer(warp_raw, dtype="<f4").reshape(n, w, warp_res, warp_res, 2).copy()
    )

    tdif_raw = _get_chunk(chunks, b"TDIF", deflate)
    _expect_size("TDIF", tdif_raw, n * t * tex_res * tex_res * 4)
    rgba = np.frombuffer(tdif_raw, dtype=np.uint8).reshape(n, t, tex_res, tex_res, 4).copy()

    spec = None
    if has_spec:
        tspc_raw = _get_chunk(chunks, b"TSPC", deflate)
        _expect_size("TSPC", tspc_raw, n * t * tex_res * tex_res * NUM_SPEC_COEFFS * 3 * 2)
        spec = (
            np.frombuffer(tspc_raw, dtype="<f2")
            .reshape(n, t, tex_res, tex_res, NUM_SPEC_COEFFS, 3)
            .copy()
        )
    elif b"TSPC" in chunks:
        raise ChunkTableError("TSPC present but specular flag unset", chunk="TSPC")

    blnd_raw = _get_chunk(chunks, b"BLND", deflate)
    _expect_size("BLND", blnd_raw, (w + t) * (p + 1) * 4)
    mats = np.frombuffer(blnd_raw, dtype="<f4")
    mapper = BlendMapper(
        warp_matrix=mats[: w * (p + 1)].astype(np.float64).reshape(w, p + 1),
        tex_matrix=mats[w * (p + 1) :].astype(np.float64).reshape(t, p + 1),
    )

    meta = AssetMeta(
        num_layers=n,
        num_warps=w,
        num_textures=t,
        p=p,
        grid_res=(grid_r, grid_c),
        tex_res=tex_res,
        warp_res=warp_res,
        scene_center=center,
        has_specular=has_spec,
    )
    try:
        return AvatarAsset(
            mesh=mesh,
            warps=WarpAtlas(maps=warp_maps),
            textures=TextureAtlas(rgba=rgba, specular=spec),
            mapper=mapper,
            meta=meta,
        )
    except ValueError as exc:
        raise DimensionError(str(exc), chunk="META") from None


def inspect_container(buf: bytes) -> dict:
    """Header, META fields, and per-chunk stored sizes without full decode."""
    flags, chunks = _parse_table(buf)
    deflate = bool(flags & FLAG_DEFLATE)
    meta_raw = _get_chunk(chunks, b"META", deflate)
    _expect_size("META", meta_raw, _META.size)
    n, w, t, p, grid_r, grid_c, tex_res, warp_res, cx, cy, cz = _META.unpack(meta_raw)
    return {
        "version": CONTAINER_VERSION,
        "flags": flags,
        "deflate": deflate,
        "has_specular": bool(flags & FLAG_SPECULAR),
        "N": n,
        "W": w,
        "T": t,
        "p": p,
        "grid_res": [grid_r, grid_c],
        "tex_res": tex_res,
        "warp_res": warp_res,
        "scene_center": [cx, cy, cz],
        "file_size": len(buf),
        "chunks": {cid.decode("ascii"): len(data) for cid, data in chunks.items()},
    }


# ---------------------------------------------------------------------------
# Frame packets
# ---------------------------------------------------------------------------

PACKET_TYPE_FRAME = 1


@dataclass(frozen=True)
class Pose:
    translation: np.ndarray  # (3,) float32
    quaternion: np.ndarray  # (4,) float32, (w, x, y, z)

    def __post_init__(self):
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float32).reshape(3)
        )
        object.__setattr__(
            self, "quaternion", np.asarray(self.quaternion, dtype=np.float32).reshape(4)
        )


@dataclass(frozen=True)
class FramePacket:
    frame_index: int
    params: ExpressionParams
    pose: Pose | None = None


def encode_frame(packet: FramePacket) -> bytes:
    p = packet.params.p
    if p > 0xFFFF:
        raise PacketError(f"p={p} exceeds the packet field width")
    out = [struct.pack("<BIH", PACKET_TYPE_FRAME, packet.frame_index, p)]
    out.append(packet.params.values.astype("<f4").tobytes())
    if packet.pose is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01")
        out.append(packet.pose.translation.astype("<f4").tobytes())
        out.append(packet.pose.quaternion.astype("<f4").tobytes())
    return b"".join(out)


def decode_frame(buf: bytes, expected_p: int | None = None) -> FramePacket:
    if len(buf) < 7:
        raise PacketError("frame packet truncated before the header")
    ptype, frame_index, p = struct.unpack_from("<BIH", buf, 0)
    if ptype != PACKET_TYPE_FRAME:
        raise PacketError(f"unexpected packet type {ptype}")
    if expected_p is not None and p != expected_p:
        raise PacketError(f"packet has p={p}, session expects p={expected_p}")
    off = 7
    if len(buf) < off + p * 4 + 1:
        raise PacketError("frame packet truncated inside the parameter block")
    values = np.frombuffer(buf, dtype="<f4", count=p, offset=off).astype(np.float64)
    off += p * 4
    pose_flag = buf[off]
    off += 1
    pose = None
    if pose_flag == 1:
        if len(buf) < off + 28:
            raise PacketError("frame packet truncated inside the pose block")
        vals = np.frombuffer(buf, dtype="<f4", count=7, offset=off)
        pose = Pose(translation=vals[:3], quaternion=vals[3:])
        off += 28
    elif pose_flag != 0:
        raise PacketError(f"unknown pose flag {pose_flag}")
    if off != len(buf):
        raise PacketError(f"frame packet has {len(buf) - off} trailing bytes")
    return FramePacket(frame_index=frame_index, params=ExpressionParams(values), pose=pose)
