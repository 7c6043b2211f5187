"""Asset baking: hemisphere ray casting, spherical UV mapping, map baking.

The bake shoots one ray per lattice cell from the front hemisphere toward
the scene center, intersects every level set by a fixed-step sign-change
scan followed by bisection, and topologizes the per-layer hits into triangle
shells sharing one lattice topology.  Warp and texture maps are evaluated at
texel centers of the same UV convention the sampler uses.
"""

from __future__ import annotations

import math

import numpy as np

from .blending import quantize_rgba
from .errors import BakeError, DegenerateSceneError
from .scenes import AnalyticScene, BakeConfig
from .sh import NUM_SPEC_COEFFS
from .types import (
    AssetMeta,
    AvatarAsset,
    LayeredMesh,
    MeshLayer,
    TextureAtlas,
    WarpAtlas,
)

__all__ = [
    "intersect_layer",
    "intersect_levels",
    "spherical_uv",
    "hemisphere_direction",
    "bake_mesh",
    "bake_maps",
    "bake_asset",
    "decimate",
    "downsample_textures",
    "texel_center_grid",
]

SCAN_STEPS = 256
FIELD_TOL = 1e-8
_MAX_BISECT = 120


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------


def hemisphere_direction(azimuth, elevation) -> np.ndarray:
    """Unit direction for (azimuth, elevation); (0, 0) is the scene's +z front."""
    az = np.asarray(azimuth, dtype=np.float64)
    el = np.asarray(elevation, dtype=np.float64)
    ce = np.cos(el)
    return np.stack([np.sin(az) * ce, np.sin(el), np.cos(az) * ce], axis=-1)


def spherical_uv(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Spherical mapping of points about the center into UV in [-1, 1]^2.

    u is azimuth over pi/2, v elevation over pi/2, both clamped.  Points
    coincident with the center are rejected.
    """
    pts = np.asarray(points, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    d = pts - center
    norms = np.linalg.norm(d, axis=-1)
    if np.any(norms == 0.0):
        raise ValueError("cannot map the scene center itself")
    d = d / norms[..., None]
    elevation = np.arcsin(np.clip(d[..., 1], -1.0, 1.0))
    azimuth = np.arctan2(d[..., 0], d[..., 2])
    uv = np.stack([azimuth, elevation], axis=-1) / (math.pi / 2.0)
    return np.clip(uv, -1.0, 1.0)


# ---------------------------------------------------------------------------
# Ray / level-set intersection
# ---------------------------------------------------------------------------


def intersect_levels(
    scene: AnalyticScene,
    origins: np.ndarray,
    directions: np.ndarray,
    near: float,
    far: float,
    steps: int = SCAN_STEPS,
) -> np.ndarray:
    """First-root distances for every ray and level; NaN where a ray misses.

    ``origins``/``directions`` are (R, 3) with unit directions.  The scan
    samples ``steps`` fixed intervals of [near, far] shared by all rays, takes
    the first sign change of (field - level) per ray and level, and bisects it
    down to |field - level| <= 1e-8.
    """
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    levels = scene.level_values
    num_rays = origins.shape[0]
    out = np.full((num_rays, levels.shape[0]), np.nan)

    ts = np.linspace(near, far, steps + 1)
    # Chunk rays to bound the (rays x samples) field evaluation.
    chunk = max(1, int(2_000_000 / (steps + 1)))
    for start in range(0, num_rays, chunk):
        sl = slice(start, min(start + chunk, num_rays))
        o = origins[sl]
        d = directions[sl]
        pts = o[:, None, :] + ts[None, :, None] * d[:, None, :]
        f = scene.scalar_field(pts)  # (chunk, steps+1)
        for li, level in enumerate(levels):
            g = f - level
            sign_change = (g[:, :-1] * g[:, 1:]) <= 0.0
            # Exclude intervals that are flat zero on both ends.
            nonzero = (g[:, :-1] != 0.0) | (g[:, 1:] != 0.0)
            hit_any = np.any(sign_change & nonzero, axis=1)
            if not np.any(hit_any):
                continue
            first = np.argmax(sign_change & nonzero, axis=1)
            lo = ts[first]
            hi = ts[first + 1]
            t_hit = _bisect(scene, o, d, lo, hi, level, hit_any)
            out[sl, li] = np.where(hit_any, t_hit, np.nan)
    return out


def _bisect(scene, origins, directions, lo, hi, level, active) -> np.ndarray:
    lo = lo.copy()
    hi = hi.copy()
    f_lo = scene.scalar_field(origins + lo[:, None] * directions) - level
    t = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECT):
        t = 0.5 * (lo + hi)
        f_mid = scene.scalar_field(origins + t[:, None] * directions) - level
        done = (np.abs(f_mid) <= FIELD_TOL) | ~active
        if np.all(done):
            break
        same_side = (f_mid * f_lo) > 0.0
        lo = np.where(same_side & ~done, t, lo)
        f_lo = np.where(same_side & ~done, f_mid, f_lo)
        hi = np.where(~same_side & ~done, t, hi)
    return t


def intersect_layer(
    scene: AnalyticScene,
    origin: np.ndarray,
    direction: np.ndarray,
    layer: int,
    near: float = 0.0,
    far: float | None = None,
) -> np.ndarray | None:
    """First intersection point of one ray with one layer, or None."""
    if not 0 <= layer < scene.num_layers:
        raise ValueError(f"layer {layer} out of range")
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    n = np.linalg.norm(direction)
    if abs(n - 1.0) > 1e-6:
        raise ValueError("ray direction must be normalized")
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    if far is None:
        far = float(np.linalg.norm(origin - scene.center) + scene.bound_radius)
    t = intersect_levels(scene, origin[None], direction[None], near, far)[0, layer]
    if np.isnan(t):
        return None
    return origin + t * direction


# ---------------------------------------------------------------------------
# Mesh baking
# ---------------------------------------------------------------------------


def _lattice_angles(config: BakeConfig) -> tuple[np.ndarray, np.ndarray]:
    g = config.grid_res
    az = np.linspace(config.azimuth_range[0], config.azimuth_range[1], g)
    el = np.linspace(config.elevation_range[0], config.elevation_range[1], g)
    return az, el


def _lattice_triangles(rows: int, cols: int, valid: np.ndarray, index_map: np.ndarray) -> np.ndarray:
    """Split every fully-valid lattice quad into two CCW triangles."""
    tris = []
    vid = index_map.reshape(rows, cols)
    ok = valid.reshape(rows, cols)
    quad_ok = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
    r, c = np.nonzero(quad_ok)
    v00 = vid[r, c]
    v01 = vid[r, c + 1]
    v10 = vid[r + 1, c]
    v11 = vid[r + 1, c + 1]
    # Winding faces the hemisphere (outward from the center).
    tris = np.empty((2 * r.shape[0], 3), dtype=np.uint32)
    tris[0::2, 0] = v00
    tris[0::2, 1] = v01
    tris[0::2, 2] = v10
    tris[1::2, 0] = v01
    tris[1::2, 1] = v11
    tris[1::2, 2] = v10
    return tris


def bake_mesh(scene: AnalyticScene, config: BakeConfig) -> LayeredMesh:
    """Cast hemisphere rays toward the center and topologize the hits.

    Canonical UVs come from the lattice parameterization, which is the
    spherical mapping of the hit points (exactly, except at the degenerate
    poles where azimuth is undefined).  Lattice cells where any layer misses
    are dropped together with their incident triangles.
    """
    g = config.grid_res
    az, el = _lattice_angles(config)
    az_grid, el_grid = np.meshgrid(az, el)  # row-major: row = elevation
    dirs = hemisphere_direction(az_grid.ravel(), el_grid.ravel())
    origins = scene.center + scene.bound_radius * dirs
    ray_dirs = -dirs

    t_hits = intersect_levels(scene, origins, ray_dirs, 0.0, scene.bound_radius)
    valid = np.all(np.isfinite(t_hits), axis=1)
    if valid.mean() < 0.5:
        raise DegenerateSceneError(
            f"{(1.0 - valid.mean()) * 100:.0f}% of lattice rays miss a layer"
        )

    index_map = np.full(g * g, -1, dtype=np.int64)
    index_map[valid] = np.arange(int(valid.sum()))
    tris = _lattice_triangles(g, g, valid, index_map)

    uv = np.stack([az_grid.ravel(), el_grid.ravel()], axis=-1) / (math.pi / 2.0)
    uv = np.clip(uv, -1.0, 1.0)[valid]

    layers = []
    for li in range(scene.num_layers):
        pos = origins[valid] + t_hits[valid, li][:, None] * ray_dirs[valid]
        layers.append(MeshLayer(positions=pos, canonical_uv=uv, triangles=tris))
    lattice_ids = np.nonzero(valid)[0].astype(np.uint32)
    return LayeredMesh(
        grid_res=(g, g),
        layers=tuple(layers),
        center=scene.center,
        lattice_ids=lattice_ids,
    )


# ---------------------------------------------------------------------------
# Map baking
# ---------------------------------------------------------------------------


def texel_center_grid(res: int) -> np.ndarray:
    """UV coordinates of texel centers, shape (res, res, 2), u along columns."""
    coords = np.linspace(-1.0, 1.0, res)
    u, v = np.meshgrid(coords, coords)
    return np.stack([u, v], axis=-1)


def bake_maps(scene: AnalyticScene, config: BakeConfig) -> tuple[WarpAtlas, TextureAtlas]:
    """Evaluate the scene's generators at texel centers and quantize."""
    n, w, t = scene.num_layers, scene.num_warps, scene.num_textures
    rw = config.effective_warp_res
    rt = config.tex_res
    uv_w = texel_center_grid(rw)
    uv_t = texel_center_grid(rt)

    warp_maps = np.empty((n, w, rw, rw, 2), dtype=np.float32)
    for li in range(n):
        for j in range(w):
            m = np.asarray(scene.warp_generators[li][j](uv_w), dtype=np.float64)
            if not np.all(np.isfinite(m)):
                bad = np.argwhere(~np.isfinite(m))[0]
                raise BakeError(
                    f"warp generator layer {li} basis {j} produced a non-finite "
                    f"value at texel {tuple(bad[:2])}"
                )
            warp_maps[li, j] = m.astype(np.float32)

    rgba = np.empty((n, t, rt, rt, 4), dtype=np.uint8)
    spec = (
        np.zeros((n, t, rt, rt, NUM_SPEC_COEFFS, 3), dtype=np.float16)
        if config.include_specular
        else None
    )
    for li in range(n):
        for k in range(t):
            color, alpha, sh = scene.texture_generators[li][k](uv_t)
            stacked = np.concatenate(
                [np.asarray(color, dtype=np.float64), np.asarray(alpha, dtype=np.float64)[..., None]],
                axis=-1,
            )
            if not np.all(np.isfinite(stacked)):
                bad = np.argwhere(~np.isfinite(stacked))[0]
                raise BakeError(
                    f"texture generator layer {li} basis {k} produced a non-finite "
                    f"value at texel {tuple(bad[:2])}"
                )
            rgba[li, k] = quantize_rgba(stacked)
            if spec is not None and sh is not None:
                if not np.all(np.isfinite(sh)):
                    raise BakeError(
                        f"specular generator layer {li} basis {k} produced a non-finite value"
                    )
                spec[li, k] = np.asarray(sh, dtype=np.float16)
    return WarpAtlas(maps=warp_maps), TextureAtlas(rgba=rgba, specular=spec)


def bake_asset(scene: AnalyticScene, config: BakeConfig) -> AvatarAsset:
    mesh = bake_mesh(scene, config)
    warps, textures = bake_maps(scene, config)
    meta = AssetMeta(
        num_layers=scene.num_layers,
        num_warps=scene.num_warps,
        num_textures=scene.num_textures,
        p=scene.p,
        grid_res=mesh.grid_res,
        tex_res=config.tex_res,
        warp_res=config.effective_warp_res,
        scene_center=scene.center,
        has_specular=textures.has_specular,
    )
    return AvatarAsset(mesh=mesh, warps=warps, textures=textures, mapper=scene.mapper, meta=meta)


# ---------------------------------------------------------------------------
# Resolution reduction
# ---------------------------------------------------------------------------


def decimate(mesh: LayeredMesh, target_grid_res: int) -> LayeredMesh:
    """Reduce the lattice to ``target_grid_res`` per axis, keeping corners.

    Kept rows/columns are the nearest lattice lines to a uniform subdivision
    including both corners (for 4 -> 2 that is exactly the corner samples).
    Requires the mesh to carry lattice ids, i.e. to come from bake_mesh or a
    full-lattice decode.
    """
    rows, cols = mesh.grid_res
    if rows != cols:
        raise ValueError("decimate expects a square lattice")
    g = rows
    if target_grid_res < 2 or target_grid_res > g:
        raise ValueError("target resolution must be in [2, grid_res]")
    if g % target_grid_res != 0:
        raise ValueError(f"target {target_grid_res} does not divide grid_res {g}")
    if target_grid_res == g:
        return mesh
    if mesh.lattice_ids is None:
        raise ValueError("mesh has no lattice structure to decimate")

    kept = np.rint(np.linspace(0, g - 1, target_grid_res)).astype(np.int64)
    keep_grid = kept[:, None] * g + kept[None, :]  # (t, t) row-major lattice ids

    # Map original lattice id -> vertex index (or -1 where the bake dropped it).
    vert_of_lattice = np.full(g * g, -1, dtype=np.int64)
    vert_of_lattice[mesh.lattice_ids.astype(np.int64)] = np.arange(mesh.num_vertices)
    src = vert_of_lattice[keep_grid.ravel()]
    valid = src >= 0

    t = target_grid_res
    index_map = np.full(t * t, -1, dtype=np.int64)
    index_map[valid] = np.arange(int(valid.sum()))
    tris = _lattice_triangles(t, t, valid, index_map)
    src_idx = src[valid]

    layers = [
        MeshLayer(
            positions=lay.positions[src_idx],
            canonical_uv=lay.canonical_uv[src_idx],
            triangles=tris,
        )
        for lay in mesh.layers
    ]
    new_ids = np.nonzero(valid)[0].astype(np.uint32)
    return LayeredMesh(
        grid_res=(t, t),
        layers=tuple(layers),
        center=mesh.center,
        lattice_ids=new_ids,
    )


def downsample_textures(atlas: TextureAtlas, factor: int) -> TextureAtlas:
    """Box-filter the texture basis by an integer factor (dequantized mean)."""
    res = atlas.resolution
    if factor < 1 or res % factor != 0:
        raise ValueError(f"factor {factor} does not divide resolution {res}")
    if factor == 1:
        return atlas
    n, t = atlas.num_layers, atlas.basis_size
    out = res // factor
    vals = atlas.rgba.astype(np.float64) / 255.0
    vals = vals.reshape(n, t, out, factor, out, factor, 4).mean(axis=(3, 5))
    rgba = quantize_rgba(vals)
    spec = None
    if atlas.specular is not None:
        s = atlas.specular.astype(np.float32)
        s = s.reshape(n, t, out, factor, out, factor, NUM_SPEC_COEFFS, 3).mean(axis=(3, 5))
        spec = s.astype(np.float16)
    return TextureAtlas(rgba=rgba, specular=spec)
