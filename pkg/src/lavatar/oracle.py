"""Ground-truth renderer: per-pixel analytic ray tracing of a scene.

The oracle evaluates exactly the same animation model as the rasterizer but
with continuous intersections and generator-evaluated warps/textures, so mesh
and texture discretization are the only differences under test.  It shares
the intersection and spherical-mapping code with the baker on purpose; an
independent dense-scan intersector in the test suite guards that shared path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baker import intersect_levels, spherical_uv
from .blending import blend_weights
from .compositing import layer_weights
from .scenes import AnalyticScene
from .sh import eval_sh
from .types import Camera, ExpressionParams

__all__ = ["OracleImage", "oracle_render", "camera_rays"]


@dataclass(frozen=True)
class OracleImage:
    rgb: np.ndarray  # (H, W, 3) float64, no background applied
    transmittance: np.ndarray  # (H, W) float64

    def to_srgb8(self, background=(0.0, 0.0, 0.0)) -> np.ndarray:
        bg = np.asarray(background, dtype=np.float64).reshape(3)
        img = self.rgb + self.transmittance[..., None] * bg
        return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def camera_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Primary ray directions through pixel centers; returns (origin, dirs (H,W,3))."""
    fwd = camera.target - camera.position
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, camera.up / np.linalg.norm(camera.up))
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)

    h, w = camera.height, camera.width
    tan_half = np.tan(camera.fov_y / 2.0)
    ndc_x = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    ndc_y = 1.0 - (np.arange(h) + 0.5) / h * 2.0
    xs = ndc_x[None, :, None] * tan_half * camera.aspect * right
    ys = ndc_y[:, None, None] * tan_half * up
    dirs = fwd + xs + ys
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return camera.position.copy(), dirs


def oracle_render(scene: AnalyticScene, params: ExpressionParams, camera: Camera) -> OracleImage:
    """Ray-trace the analytic scene under the given expression parameters."""
    to_cam = camera.position - scene.center
    if to_cam[2] <= 0.0:
        raise ValueError("camera must be in the front hemisphere of the scene")
    weights = blend_weights(scene.mapper, params)

    origin, dirs = camera_rays(camera)
    h, w = dirs.shape[:2]
    flat_dirs = dirs.reshape(-1, 3)
    num_rays = flat_dirs.shape[0]
    origins = np.broadcast_to(origin, flat_dirs.shape)

    far = float(np.linalg.norm(to_cam) + scene.bound_radius)
    t_hits = intersect_levels(scene, origins, flat_dirs, camera.near, far)

    n = scene.num_layers
    alphas = np.zeros((n, num_rays))
    colors = np.zeros((n, num_rays, 3))
    for li in range(n):
        hit = np.isfinite(t_hits[:, li])
        if not np.any(hit):
            continue
        pts = origins[hit] + t_hits[hit, li][:, None] * flat_dirs[hit]
        uv = spherical_uv(pts, scene.center)

        du = np.zeros_like(uv)
        for j, gen in enumerate(scene.warp_generators[li]):
            g = weights.gamma[j]
            if g != 0.0:
                du += g * np.asarray(gen(uv), dtype=np.float64)
        uv_warped = uv + du

        rgb = np.zeros((uv.shape[0], 3))
        alpha = np.zeros(uv.shape[0])
        spec = np.zeros((uv.shape[0], 8, 3)) if scene.has_specular else None
        for k, gen in enumerate(scene.texture_generators[li]):
            b = weights.beta[k]
            if b == 0.0:
                continue
            c, a, s = gen(uv_warped)
            rgb += b * np.asarray(c, dtype=np.float64)
            alpha += b * np.asarray(a, dtype=np.float64)
            if spec is not None and s is not None:
                spec += b * np.asarray(s, dtype=np.float64)
        alpha = np.clip(alpha, 0.0, 1.0)
        rgb = eval_sh(rgb, spec, flat_dirs[hit])

        alphas[li, hit] = alpha
        colors[li, hit] = rgb

    lw, residual = layer_weights(alphas)
    out_rgb = np.einsum("nr,nrc->rc", lw, colors)
    return OracleImage(
        rgb=out_rgb.reshape(h, w, 3),
        transmittance=residual.reshape(h, w),
    )
