"""Domain types for layered-mesh avatars.

Coordinate conventions used throughout the package:

* Scene frame: right-handed, +z is the "front" of the scene (toward the
  viewing hemisphere), +y up, +x right.  Directions on the front hemisphere
  are parameterized by azimuth (rotation about +y, zero at +z) and elevation
  (angle above the xz-plane), both in [-pi/2, pi/2].
* UV domain: [-1, 1]^2.  u = azimuth / (pi/2), v = elevation / (pi/2) of the
  direction from the scene center.
* Layers are indexed near-to-far as seen from the front hemisphere: layer 0
  is composited first (Eq.-style front-to-back weights), so for nested shells
  layer 0 is the outermost one and center distance decreases with the index.
* Texel-center alignment: uv = (-1, -1) is the center of texel (row 0, col 0)
  and uv = (+1, +1) the center of texel (res-1, res-1); u maps to columns and
  v to rows.

All types are immutable after construction; their numpy buffers are marked
read-only so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ExpressionParams",
    "BlendMapper",
    "BlendWeights",
    "MeshLayer",
    "LayeredMesh",
    "WarpAtlas",
    "TextureAtlas",
    "BlendedTexture",
    "AssetMeta",
    "AvatarAsset",
    "Camera",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ExpressionParams:
    """Tracked face-model expression coefficients for one frame."""

    values: np.ndarray  # (p,) float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        _require_finite(v, "expression params")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def zeros(p: int) -> "ExpressionParams":
        return ExpressionParams(np.zeros(p))


@dataclass(frozen=True)
class BlendMapper:
    """Affine maps from expression params to warp/texture blend weights.

    The last column of each matrix is the constant offset, so weights are
    ``matrix @ [params, 1]``.
    """

    warp_matrix: np.ndarray  # (W, p+1) float64
    tex_matrix: np.ndarray  # (T, p+1) float64

    def __post_init__(self):
        wm = np.asarray(self.warp_matrix, dtype=np.float64)
        tm = np.asarray(self.tex_matrix, dtype=np.float64)
        if wm.ndim != 2 or tm.ndim != 2:
            raise ValueError("blend matrices must be 2-D")
        if wm.shape[1] != tm.shape[1]:
            raise ValueError(
                f"warp/tex matrices disagree on p+1: {wm.shape[1]} vs {tm.shape[1]}"
            )
        if wm.shape[1] < 1:
            raise ValueError("blend matrices need at least the offset column")
        _require_finite(wm, "warp matrix")
        _require_finite(tm, "tex matrix")
        object.__setattr__(self, "warp_matrix", _freeze(wm))
        object.__setattr__(self, "tex_matrix", _freeze(tm))

    @property
    def num_warps(self) -> int:
        return self.warp_matrix.shape[0]

    @property
    def num_textures(self) -> int:
        return self.tex_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.warp_matrix.shape[1] - 1


@dataclass(frozen=True)
class BlendWeights:
    """Per-frame blend weights: gamma for warps, beta for textures."""

    gamma: np.ndarray  # (W,) float64
    beta: np.ndarray  # (T,) float64

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        b = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        _require_finite(g, "gamma")
        _require_finite(b, "beta")
        object.__setattr__(self, "gamma", _freeze(g))
        object.__setattr__(self, "beta", _freeze(b))


@dataclass(frozen=True)
class MeshLayer:
    """One shell of the layered mesh.

    All layers of a mesh share triangle topology and vertex order; only the
    3-D positions (and, in principle, the canonical UVs) differ.
    """

    positions: np.ndarray  # (V, 3) float64, scene units
    canonical_uv: np.ndarray  # (V, 2) float64 in [-1, 1]
    triangles: np.ndarray  # (F, 3) uint32, CCW toward the viewing hemisphere

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        uv = np.asarray(self.canonical_uv, dtype=np.float64)
        tri = np.asarray(self.triangles, dtype=np.uint32)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must be (V, 3)")
        if uv.shape != (pos.shape[0], 2):
            raise ValueError("canonical_uv must be (V, 2)")
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValueError("triangles must be (F, 3)")
        _require_finite(pos, "positions")
        _require_finite(uv, "canonical_uv")
        if tri.size and tri.max() >= pos.shape[0]:
            raise ValueError("triangle index out of range")
        if uv.size and (uv.min() < -1.0 - 1e-9 or uv.max() > 1.0 + 1e-9):
            raise ValueError("canonical_uv outside [-1, 1]^2")
        object.__setattr__(self, "positions", _freeze(pos))
        object.__setattr__(self, "canonical_uv", _freeze(uv))
        object.__setattr__(self, "triangles", _freeze(tri))

    @property
    def num_vertices(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class LayeredMesh:
    """Depth-ordered triangle shells with canonical UV vertex attributes.

    ``lattice_ids`` maps each vertex to its row-major index on the bake
    lattice; it is carried in memory so meshes can be re-decimated, but it is
    not part of the serialized asset (decode reconstructs it only for
    full-lattice meshes).
    """

    grid_res: tuple[int, int]  # (rows, cols) of the bake lattice
    layers: tuple[MeshLayer, ...]
    center: np.ndarray  # (3,) scene center the shells nest around
    lattice_ids: np.ndarray | None = None  # (V,) uint32, shared by all layers

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("mesh needs at least one layer")
        v0 = layers[0].num_vertices
        t0 = layers[0].triangles
        for lay in layers[1:]:
            if lay.num_vertices != v0:
                raise ValueError("layers must share vertex count")
            if not np.array_equal(lay.triangles, t0):
                raise ValueError("layers must share triangle topology")
        center = _freeze(np.asarray(self.center, dtype=np.float64).reshape(3))
        _require_finite(center, "center")
        if self.lattice_ids is not None:
            ids = np.asarray(self.lattice_ids, dtype=np.uint32).reshape(-1)
            if ids.shape[0] != v0:
                raise ValueError("lattice_ids length must match vertex count")
            object.__setattr__(self, "lattice_ids", _freeze(ids))
        # Shells must be strictly depth-ordered: layer 0 is nearest the
        # viewer, so per vertex the distance to the scene center decreases
        # with the layer index.
        if v0:
            prev = None
            for i, lay in enumerate(layers):
                d = np.linalg.norm(lay.positions - center, axis=1)
                if prev is not None and not np.all(d < prev):
                    raise ValueError(
                        f"layers {i - 1}/{i} are not nested near-to-far"
                    )
                prev = d
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "center", center)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_vertices(self) -> int:
        return self.layers[0].num_vertices

    @property
    def triangles(self) -> np.ndarray:
        return self.layers[0].triangles


@dataclass(frozen=True)
class WarpAtlas:
    """Per-layer basis of UV-offset maps, stored at 32-bit precision."""

    maps: np.ndarray  # (N, W, res, res, 2) float32, UV-space offsets

    # Sanity bound: a per-component offset larger than the whole UV domain
    # would be meaningless.
    MAX_OFFSET = 2.0

    def __post_init__(self):
        m = np.asarray(self.maps, dtype=np.float32)
        if m.ndim != 5 or m.shape[-1] != 2 or m.shape[2] != m.shape[3]:
            raise ValueError("warp maps must be (N, W, res, res, 2)")
        _require_finite(m, "warp maps")
        if m.size and np.abs(m).max() > self.MAX_OFFSET:
            raise ValueError("warp offsets exceed the UV-domain sanity bound")
        object.__setattr__(self, "maps", _freeze(m))

    @property
    def num_layers(self) -> int:
        return self.maps.shape[0]

    @property
    def basis_size(self) -> int:
        return self.maps.shape[1]

    @property
    def resolution(self) -> int:
        return self.maps.shape[2]


@dataclass(frozen=True)
class TextureAtlas:
    """Per-layer basis of appearance maps.

    Diffuse RGB and alpha are kept at their 8-bit storage precision; the
    optional specular block holds 8 spherical-harmonics coefficients (bands 1
    and 2) per color channel at 16-bit precision.  Blending dequantizes on
    the fly.
    """

    rgba: np.ndarray  # (N, T, res, res, 4) uint8
    specular: np.ndarray | None = None  # (N, T, res, res, 8, 3) float16

    def __post_init__(self):
        r = np.asarray(self.rgba)
        if r.dtype != np.uint8:
            raise ValueError("diffuse/alpha maps must be uint8")
        if r.ndim != 5 or r.shape[-1] != 4 or r.shape[2] != r.shape[3]:
            raise ValueError("rgba maps must be (N, T, res, res, 4)")
        object.__setattr__(self, "rgba", _freeze(r))
        if self.specular is not None:
            s = np.asarray(self.specular)
            if s.dtype != np.float16:
                raise ValueError("specular maps must be float16")
            if s.shape != r.shape[:4] + (8, 3):
                raise ValueError("specular maps must be (N, T, res, res, 8, 3)")
            _require_finite(s.astype(np.float32), "specular maps")
            object.__setattr__(self, "specular", _freeze(s))

    @property
    def num_layers(self) -> int:
        return self.rgba.shape[0]

    @property
    def basis_size(self) -> int:
        return self.rgba.shape[1]

    @property
    def resolution(self) -> int:
        return self.rgba.shape[2]

    @property
    def has_specular(self) -> bool:
        return self.specular is not None


@dataclass(frozen=True)
class BlendedTexture:
    """Per-layer appearance maps after basis blending (real arithmetic)."""

    rgba: np.ndarray  # (N, res, res, 4) float32, alpha clamped to [0, 1]
    specular: np.ndarray | None = None  # (N, res, res, 8, 3) float32


@dataclass(frozen=True)
class AssetMeta:
    num_layers: int
    num_warps: int
    num_textures: int
    p: int
    grid_res: tuple[int, int]
    tex_res: int
    warp_res: int
    scene_center: np.ndarray  # (3,)
    has_specular: bool
    version: int = 1

    def __post_init__(self):
        c = _freeze(np.asarray(self.scene_center, dtype=np.float64).reshape(3))
        _require_finite(c, "scene_center")
        object.__setattr__(self, "scene_center", c)
        object.__setattr__(self, "grid_res", tuple(int(x) for x in self.grid_res))


@dataclass(frozen=True)
class AvatarAsset:
    """Everything streamed once: mesh, bases, blend mapper and metadata."""

    mesh: LayeredMesh
    warps: WarpAtlas
    textures: TextureAtlas
    mapper: BlendMapper
    meta: AssetMeta

    def __post_init__(self):
        m = self.meta
        checks = [
            ("mesh layers", self.mesh.num_layers, m.num_layers),
            ("warp layers", self.warps.num_layers, m.num_layers),
            ("texture layers", self.textures.num_layers, m.num_layers),
            ("warp basis", self.warps.basis_size, m.num_warps),
            ("texture basis", self.textures.basis_size, m.num_textures),
            ("mapper warp rows", self.mapper.num_warps, m.num_warps),
            ("mapper tex rows", self.mapper.num_textures, m.num_textures),
            ("mapper p", self.mapper.p, m.p),
            ("warp res", self.warps.resolution, m.warp_res),
            ("texture res", self.textures.resolution, m.tex_res),
            ("specular flag", self.textures.has_specular, m.has_specular),
        ]
        for what, got, want in checks:
            if got != want:
                raise ValueError(f"asset inconsistency: {what} is {got}, meta says {want}")


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: position/look-at/up plus a vertical field of view."""

    position: np.ndarray  # (3,)
    target: np.ndarray  # (3,)
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    fov_y: float = np.deg2rad(30.0)  # radians
    width: int = 512
    height: int = 512
    near: float = 0.05
    far: float = 100.0

    def __post_init__(self):
        pos = _freeze(np.asarray(self.position, dtype=np.float64).reshape(3))
        tgt = _freeze(np.asarray(self.target, dtype=np.float64).reshape(3))
        up = np.asarray(self.up, dtype=np.float64).reshape(3)
        _require_finite(pos, "camera position")
        _require_finite(tgt, "camera target")
        if not (0.0 < self.fov_y < np.pi):
            raise ValueError("fov_y must be in (0, pi)")
        if not (0.0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        fwd = tgt - pos
        n = np.linalg.norm(fwd)
        if n == 0.0:
            raise ValueError("camera position equals target")
        fwd = fwd / n
        un = np.linalg.norm(up)
        if un == 0.0 or np.linalg.norm(np.cross(fwd, up / un)) < 1e-8:
            raise ValueError("up vector is degenerate or parallel to the view direction")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "up", _freeze(up))
        object.__setattr__(self, "fov_y", float(self.fov_y))

    @property
    def aspect(self) -> float:
        return self.width / self.height
