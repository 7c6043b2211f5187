"""Frame-rate benchmark over render and mesh resolutions.

Produces the table the paper-style ablation plots come from: rows are mesh
resolutions, columns render resolutions, cells frames per second of the
prebaked path (after one warm-up render so JIT compilation never counts).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import raster
from .baker import decimate
from .types import AvatarAsset, Camera, ExpressionParams

__all__ = ["BenchRow", "run_benchmark", "format_table", "default_bench_camera"]


@dataclass(frozen=True)
class BenchRow:
    mesh_res: int
    image_size: int
    frames: int
    seconds_per_frame: float

    @property
    def fps(self) -> float:
        return 1.0 / self.seconds_per_frame if self.seconds_per_frame > 0 else float("inf")


def default_bench_camera(asset: AvatarAsset, size: int) -> Camera:
    center = asset.meta.scene_center
    return Camera(
        position=center + np.array([0.0, 0.0, 1.2]),
        target=center,
        fov_y=np.deg2rad(26.0),
        width=size,
        height=size,
    )


def _asset_with_mesh(asset: AvatarAsset, mesh_res: int) -> AvatarAsset:
    rows, cols = asset.meta.grid_res
    if mesh_res == rows == cols:
        return asset
    mesh = decimate(asset.mesh, mesh_res)
    return AvatarAsset(
        mesh=mesh,
        warps=asset.warps,
        textures=asset.textures,
        mapper=asset.mapper,
        meta=replace(asset.meta, grid_res=mesh.grid_res),
    )


def run_benchmark(
    asset: AvatarAsset,
    image_sizes=(256, 512),
    mesh_resolutions=(32, 128),
    frames: int = 5,
    options: raster.RenderOptions = raster.RenderOptions(),
    seed: int = 11,
) -> list[BenchRow]:
    rng = np.random.default_rng(seed)
    params = [
        ExpressionParams(rng.normal(0.0, 0.3, asset.meta.p)) for _ in range(frames)
    ]
    rows = []
    for mesh_res in mesh_resolutions:
        bench_asset = _asset_with_mesh(asset, mesh_res)
        for size in image_sizes:
            camera = default_bench_camera(bench_asset, size)
            raster.render(bench_asset, params[0], camera, options)  # warm-up
            t0 = time.perf_counter()
            for pr in params:
                raster.render(bench_asset, pr, camera, options)
            dt = (time.perf_counter() - t0) / frames
            rows.append(
                BenchRow(mesh_res=mesh_res, image_size=size, frames=frames, seconds_per_frame=dt)
            )
    return rows


def format_table(rows: list[BenchRow]) -> str:
    sizes = sorted({r.image_size for r in rows})
    meshes = sorted({r.mesh_res for r in rows})
    by_key = {(r.mesh_res, r.image_size): r for r in rows}
    header = "mesh \\ render  " + "".join(f"{s:>10}" for s in sizes)
    lines = [header, "-" * len(header)]
    for m in meshes:
        cells = []
        for s in sizes:
            r = by_key.get((m, s))
            cells.append(f"{r.fps:>8.1f}fps" if r else " " * 10)
        lines.append(f"{m:>4}x{m:<4}      " + "".join(cells))
    return "\n".join(lines)
