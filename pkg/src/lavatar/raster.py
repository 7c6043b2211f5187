"""Deployment renderer: the programmable-shader pipeline over a layered mesh.

Per frame: map expression params to blend weights once, then for each layer
near-to-far project its vertices, rasterize with perspective-correct UV
interpolation, warp the UVs, sample the blended texture, add the specular SH
term, and composite front-to-back with per-pixel transmittance.  Prebaked
mode blends whole maps before rasterizing (mirroring the deployment shader's
precomputed linear phases); fused mode samples all basis maps per fragment
and applies the weights afterwards, which must agree by sampling linearity.

Backfaces are not culled: the shells are open single-sided sheets, and
extreme cameras outside the front hemisphere should still produce fragments
for the layer-order diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import EARLY_OUT_TRANSMITTANCE, rasterize_depth, rasterize_layer
from .blending import blend_texture_maps, blend_warp_maps, blend_weights
from .types import AvatarAsset, BlendedTexture, Camera, ExpressionParams, LayeredMesh

__all__ = [
    "RenderOptions",
    "RenderResult",
    "LayerOrderReport",
    "render",
    "render_prebaked",
    "project",
    "verify_layer_order",
]

_MODES = ("prebaked", "fused")


@dataclass(frozen=True)
class RenderOptions:
    mode: str = "prebaked"
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    debug_abuffer: bool = False
    use_specular: bool = True

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")


@dataclass(frozen=True)
class RenderResult:
    image: np.ndarray  # (H, W, 3) uint8, background applied
    transmittance: np.ndarray  # (H, W) float64, residual before background
    weight_sum: np.ndarray  # (H, W) float64, accumulated compositing weight
    float_rgb: np.ndarray  # (H, W, 3) float64, accumulated color pre-background
    layer_depths: np.ndarray | None = None  # (N, H, W) float64 when debug_abuffer


@dataclass(frozen=True)
class LayerOrderReport:
    pixels_checked: int
    violations: int
    examples: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.violations == 0


# ---------------------------------------------------------------------------
# Camera math
# ---------------------------------------------------------------------------


def _camera_basis(camera: Camera) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    fwd = camera.target - camera.position
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, camera.up / np.linalg.norm(camera.up))
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)
    return right, up, fwd


def _view_coords(camera: Camera, pts: np.ndarray) -> np.ndarray:
    right, up, fwd = _camera_basis(camera)
    rel = pts - camera.position
    return np.stack([rel @ right, rel @ up, rel @ fwd], axis=-1)


def _screen_from_view(camera: Camera, view: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel coordinates and view depth from view-space points.

    Pixel (row, col) has its center at (col + 0.5, row + 0.5); the divide is
    unguarded, so callers must clip geometry crossing the near plane first.
    """
    tan_half = np.tan(camera.fov_y / 2.0)
    w = view[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = view[..., 0] / (w * tan_half * camera.aspect)
        ndc_y = view[..., 1] / (w * tan_half)
    px = (ndc_x + 1.0) * 0.5 * camera.width
    py = (1.0 - ndc_y) * 0.5 * camera.height
    return px, py, w


def project(camera: Camera, point: np.ndarray) -> tuple[float, float, float]:
    """Project one world point; returns (pixel_x, pixel_y, view_depth)."""
    view = _view_coords(camera, np.asarray(point, dtype=np.float64).reshape(1, 3))
    px, py, w = _screen_from_view(camera, view)
    return float(px[0]), float(py[0]), float(w[0])


# ---------------------------------------------------------------------------
# Near-plane clipping
# ---------------------------------------------------------------------------


def _clip_layer(view: np.ndarray, uv: np.ndarray, wpos: np.ndarray, tris: np.ndarray, near: float):
    """Clip triangles against the near plane in view space.

    Returns (view, uv, wpos, tris); the fast path reuses the input arrays
    when nothing crosses the plane.
    """
    w = view[:, 2]
    behind = w < near
    tri_behind = behind[tris]
    n_behind = tri_behind.sum(axis=1)
    if not n_behind.any():
        return view, uv, wpos, tris.astype(np.int64)

    keep = tris[n_behind == 0]
    crossing = tris[(n_behind > 0) & (n_behind < 3)]

    new_view = [view]
    new_uv = [uv]
    new_wpos = [wpos]
    new_tris = [keep.astype(np.int64)]
    next_idx = view.shape[0]
    for tri in crossing:
        poly = []  # list of (view3, uv2, wpos3)
        for a in range(3):
            ia, ib = tri[a], tri[(a + 1) % 3]
            va, vb = view[ia], view[ib]
            in_a, in_b = va[2] >= near, vb[2] >= near
            if in_a:
                poly.append((va, uv[ia], wpos[ia]))
            if in_a != in_b:
                s = (near - va[2]) / (vb[2] - va[2])
                poly.append(
                    (
                        va + s * (vb - va),
                        uv[ia] + s * (uv[ib] - uv[ia]),
                        wpos[ia] + s * (wpos[ib] - wpos[ia]),
                    )
                )
        if len(poly) < 3:
            continue
        base = next_idx
        new_view.append(np.array([p[0] for p in poly]))
        new_uv.append(np.array([p[1] for p in poly]))
        new_wpos.append(np.array([p[2] for p in poly]))
        fan = [[base, base + i, base + i + 1] for i in range(1, len(poly) - 1)]
        new_tris.append(np.asarray(fan, dtype=np.int64))
        next_idx += len(poly)

    return (
        np.concatenate(new_view),
        np.concatenate(new_uv),
        np.concatenate(new_wpos),
        np.concatenate(new_tris) if new_tris else np.zeros((0, 3), np.int64),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_EMPTY_SPEC = np.zeros((1, 1, 1, 24), dtype=np.float32)
_ONE = np.ones(1, dtype=np.float64)


def _layer_geometry(mesh: LayeredMesh, camera: Camera, layer: int):
    lay = mesh.layers[layer]
    view = _view_coords(camera, lay.positions)
    view, uv, wpos, tris = _clip_layer(
        view, lay.canonical_uv, lay.positions, lay.triangles.astype(np.int64), camera.near
    )
    # Triangles fully beyond the far plane never shade a fragment.
    if tris.shape[0]:
        all_far = np.all(view[:, 2][tris] > camera.far, axis=1)
        if all_far.any():
            tris = tris[~all_far]
    px, py, w = _screen_from_view(camera, view)
    inv_w = np.where(w > 0.0, 1.0 / np.maximum(w, 1e-300), 0.0)
    return (
        np.ascontiguousarray(tris),
        np.ascontiguousarray(px),
        np.ascontiguousarray(py),
        np.ascontiguousarray(inv_w),
        np.ascontiguousarray(uv),
        np.ascontiguousarray(wpos),
    )


def _render_layers(
    mesh: LayeredMesh,
    camera: Camera,
    options: RenderOptions,
    layer_inputs,
) -> RenderResult:
    h, w = camera.height, camera.width
    rgb_acc = np.zeros((h, w, 3), dtype=np.float64)
    weight_acc = np.zeros((h, w), dtype=np.float64)
    trans = np.ones((h, w), dtype=np.float64)
    depths = (
        np.full((mesh.num_layers, h, w), np.inf, dtype=np.float64)
        if options.debug_abuffer
        else None
    )
    cam = np.ascontiguousarray(camera.position, dtype=np.float64)

    for li in range(mesh.num_layers):
        tris, px, py, inv_w, uv, wpos = _layer_geometry(mesh, camera, li)
        if tris.shape[0] == 0:
            continue
        warp_basis, gamma, tex_basis, beta, tex_scale, spec_basis, spec_w, has_spec = layer_inputs(li)
        rasterize_layer(
            tris,
            px,
            py,
            inv_w,
            uv,
            wpos,
            warp_basis,
            gamma,
            tex_basis,
            beta,
            tex_scale,
            spec_basis,
            spec_w,
            has_spec,
            cam,
            camera.near,
            camera.far,
            rgb_acc,
            weight_acc,
            trans,
        )
        if depths is not None:
            rasterize_depth(tris, px, py, inv_w, camera.near, camera.far, depths[li])

    bg = np.asarray(options.background, dtype=np.float64).reshape(3)
    img = rgb_acc + trans[..., None] * bg
    image = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return RenderResult(
        image=image,
        transmittance=trans,
        weight_sum=weight_acc,
        float_rgb=rgb_acc,
        layer_depths=depths,
    )


def render_prebaked(
    asset: AvatarAsset,
    blended_warp: np.ndarray,
    blended_tex: BlendedTexture,
    camera: Camera,
    options: RenderOptions = RenderOptions(),
) -> RenderResult:
    """Render from already-blended per-layer maps (also the server-blend path)."""
    warp = np.ascontiguousarray(blended_warp, dtype=np.float32)
    rgba = np.ascontiguousarray(blended_tex.rgba, dtype=np.float32)
    spec = None
    if options.use_specular and blended_tex.specular is not None:
        n, rt = rgba.shape[0], rgba.shape[1]
        spec = np.ascontiguousarray(
            blended_tex.specular.reshape(n, rt, rt, 24), dtype=np.float32
        )

    def layer_inputs(li):
        spec_b = _EMPTY_SPEC if spec is None else spec[li : li + 1]
        return (
            warp[li : li + 1],
            _ONE,
            rgba[li : li + 1],
            _ONE,
            1.0,
            spec_b,
            _ONE,
            spec is not None,
        )

    return _render_layers(asset.mesh, camera, options, layer_inputs)


def render(
    asset: AvatarAsset,
    params: ExpressionParams,
    camera: Camera,
    options: RenderOptions = RenderOptions(),
) -> RenderResult:
    """Render the asset under expression params from the given camera."""
    if params.p != asset.meta.p:
        raise ValueError(f"params have p={params.p}, asset expects p={asset.meta.p}")
    weights = blend_weights(asset.mapper, params)

    if options.mode == "prebaked":
        blended_warp = blend_warp_maps(asset.warps, weights.gamma)
        blended_tex = blend_texture_maps(asset.textures, weights.beta)
        return render_prebaked(asset, blended_warp, blended_tex, camera, options)

    # Fused: sample the raw bases per fragment, weights applied afterwards.
    warp_maps = np.ascontiguousarray(asset.warps.maps)
    rgba_basis = np.ascontiguousarray(asset.textures.rgba)
    gamma = np.ascontiguousarray(weights.gamma, dtype=np.float64)
    beta = np.ascontiguousarray(weights.beta, dtype=np.float64)
    spec_basis = None
    if options.use_specular and asset.textures.specular is not None:
        n, t, rt = rgba_basis.shape[0], rgba_basis.shape[1], rgba_basis.shape[2]
        spec_basis = np.ascontiguousarray(
            asset.textures.specular.astype(np.float32).reshape(n, t, rt, rt, 24)
        )

    def layer_inputs(li):
        spec_b = _EMPTY_SPEC if spec_basis is None else spec_basis[li]
        spec_w = _ONE if spec_basis is None else beta
        return (
            warp_maps[li],
            gamma,
            rgba_basis[li],
            beta,
            1.0 / 255.0,
            spec_b,
            spec_w,
            spec_basis is not None,
        )

    return _render_layers(asset.mesh, camera, options, layer_inputs)


# ---------------------------------------------------------------------------
# Layer-order diagnostics
# ---------------------------------------------------------------------------


def verify_layer_order(
    asset: AvatarAsset,
    camera: Camera,
    params: ExpressionParams | None = None,
    depth_eps: float = 1e-7,
    max_examples: int = 10,
) -> LayerOrderReport:
    """Check that static layer order equals true depth order per pixel.

    Warps never move vertices, so ``params`` does not influence the result;
    it is accepted for symmetry with render.  Fragments are collected with a
    per-layer depth pass (the debug A-buffer) and pixels where a later layer
    is strictly nearer than an earlier one are reported.
    """
    del params
    mesh = asset.mesh
    h, w = camera.height, camera.width
    depths = np.full((mesh.num_layers, h, w), np.inf, dtype=np.float64)
    for li in range(mesh.num_layers):
        tris, px, py, inv_w, _uv, _wpos = _layer_geometry(mesh, camera, li)
        if tris.shape[0]:
            rasterize_depth(tris, px, py, inv_w, camera.near, camera.far, depths[li])

    running_max = np.full((h, w), -np.inf)
    violated = np.zeros((h, w), dtype=bool)
    any_fragment = np.zeros((h, w), dtype=bool)
    for li in range(mesh.num_layers):
        present = np.isfinite(depths[li])
        any_fragment |= present
        violated |= present & (depths[li] + depth_eps < running_max)
        running_max = np.where(present, np.maximum(running_max, depths[li]), running_max)

    rows, cols = np.nonzero(violated)
    examples = tuple((int(r), int(c)) for r, c in zip(rows[:max_examples], cols[:max_examples]))
    return LayerOrderReport(
        pixels_checked=int(any_fragment.sum()),
        violations=int(violated.sum()),
        examples=examples,
    )
