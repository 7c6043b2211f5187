"""Shared fixtures: tiny scenes and assets that bake in milliseconds."""

import numpy as np
import pytest

from lavatar import Camera, ExpressionParams
from lavatar.baker import bake_asset
from lavatar.scenes import AnalyticScene, BakeConfig, minimal_scene, spheres_scene
from lavatar.types import BlendMapper


def flat_layer_scene(layer_specs, radii=None, p=2, warp_gens=None, name="flat"):
    """Scene with one flat texture basis per layer: [(rgb, alpha), ...] near-to-far."""
    n = len(layer_specs)
    if radii is None:
        radii = np.linspace(0.6, 0.4, n)
    radii = np.asarray(radii, dtype=np.float64)
    r0 = float(radii[0])

    def field(pts):
        pts = np.asarray(pts, dtype=np.float64)
        return r0 + 1.0 - np.linalg.norm(pts, axis=-1)

    def make_tex(rgb, alpha):
        rgb = np.asarray(rgb, dtype=np.float64)

        def gen(uv):
            uv = np.asarray(uv, dtype=np.float64)
            shape = uv.shape[:-1]
            return np.broadcast_to(rgb, shape + (3,)).copy(), np.full(shape, alpha), None

        return gen

    def zero_warp(uv):
        uv = np.asarray(uv, dtype=np.float64)
        return np.zeros(uv.shape[:-1] + (2,))

    # One warp and one texture basis element; weights come out as the plain
    # offset column (gamma=0, beta=1) for zero params.
    warp_matrix = np.zeros((1, p + 1))
    tex_matrix = np.zeros((1, p + 1))
    tex_matrix[0, p] = 1.0
    return AnalyticScene(
        name=name,
        scalar_field=field,
        level_values=r0 + 1.0 - radii,
        center=np.zeros(3),
        warp_generators=[[zero_warp] if warp_gens is None else [warp_gens[i]] for i in range(n)],
        texture_generators=[[make_tex(rgb, a)] for rgb, a in layer_specs],
        mapper=BlendMapper(warp_matrix=warp_matrix, tex_matrix=tex_matrix),
        bound_radius=r0 + 0.5,
    )


@pytest.fixture(scope="session")
def tiny_asset():
    scene = minimal_scene()
    return scene, bake_asset(scene, BakeConfig(grid_res=24, tex_res=16))


@pytest.fixture(scope="session")
def sphere_asset():
    scene = spheres_scene(radii=(0.55, 0.48, 0.41), warps=2, textures=2, p=3,
                          texture_style="smooth", warp_style="sine")
    return scene, bake_asset(scene, BakeConfig(grid_res=48, tex_res=32))


@pytest.fixture
def small_camera():
    return Camera(position=(0.0, 0.0, 1.1), target=(0.0, 0.0, 0.0),
                  fov_y=np.deg2rad(40.0), width=48, height=48)


def random_params(p, rng, scale=0.3):
    return ExpressionParams(rng.normal(0.0, scale, p))
