"""Ground-truth renderer: trivial scenes, a hand-traced ray, and properties."""

import math
from dataclasses import replace

import numpy as np
import pytest

from lavatar import Camera, ExpressionParams
from lavatar.oracle import camera_rays, oracle_render
from lavatar.scenes import ellipsoid_scene
from lavatar.types import BlendMapper

from conftest import flat_layer_scene


def test_single_opaque_layer_constant_gray():
    scene = flat_layer_scene([((0.5, 0.5, 0.5), 1.0)], radii=[0.5])
    camera = Camera(position=(0, 0, 1.2), target=(0, 0, 0), fov_y=np.deg2rad(30), width=24, height=24)
    img = oracle_render(scene, ExpressionParams.zeros(2), camera)
    assert np.all(img.transmittance == 0.0)
    np.testing.assert_allclose(img.rgb, 0.5, atol=1e-12)


def test_background_pixels_have_full_transmittance():
    scene = flat_layer_scene([((0.5, 0.5, 0.5), 1.0)], radii=[0.3])
    camera = Camera(position=(0, 0, 1.2), target=(0, 0, 0), fov_y=np.deg2rad(60), width=32, height=32)
    img = oracle_render(scene, ExpressionParams.zeros(2), camera)
    corners = img.transmittance[[0, 0, -1, -1], [0, -1, 0, -1]]
    np.testing.assert_array_equal(corners, 1.0)
    np.testing.assert_array_equal(img.rgb[0, 0], 0.0)


def test_two_layer_hand_compositing():
    scene = flat_layer_scene([((1.0, 1.0, 1.0), 0.5), ((0.0, 0.0, 0.0), 0.5)])
    camera = Camera(position=(0, 0, 1.3), target=(0, 0, 0), fov_y=np.deg2rad(25), width=16, height=16)
    img = oracle_render(scene, ExpressionParams.zeros(2), camera)
    np.testing.assert_allclose(img.rgb, 0.5, atol=1e-12)
    np.testing.assert_allclose(img.transmittance, 0.25, atol=1e-12)


def test_camera_behind_scene_rejected():
    scene = flat_layer_scene([((0.5, 0.5, 0.5), 1.0)])
    camera = Camera(position=(0, 0, -1.2), target=(0, 0, 0), width=8, height=8)
    with pytest.raises(ValueError, match="front hemisphere"):
        oracle_render(scene, ExpressionParams.zeros(2), camera)


def _trace_pixel(scene, params, camera, row, col):
    """Independent single-ray trace: own ray setup, bisection, Eq.-style mix."""
    # Camera ray through the pixel center, built from first principles.
    fwd = camera.target - camera.position
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, camera.up / np.linalg.norm(camera.up))
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)
    tan_half = math.tan(camera.fov_y / 2.0)
    ndc_x = (col + 0.5) / camera.width * 2.0 - 1.0
    ndc_y = 1.0 - (row + 0.5) / camera.height * 2.0
    d = fwd + ndc_x * tan_half * camera.aspect * right + ndc_y * tan_half * up
    d = d / np.linalg.norm(d)

    homog = np.concatenate([params.values, [1.0]])
    gamma = scene.mapper.warp_matrix @ homog
    beta = scene.mapper.tex_matrix @ homog

    far = float(np.linalg.norm(camera.position - scene.center) + scene.bound_radius)
    color_accum = np.zeros(3)
    trans = 1.0
    for li, level in enumerate(scene.level_values):
        # Own scan + bisection at 10x the production step count.
        ts = np.linspace(camera.near, far, 2561)
        f = np.array([scene.scalar_field(camera.position + t * d) - level for t in ts])
        crossings = np.nonzero(f[:-1] * f[1:] <= 0)[0]
        assert crossings.size, "fixture ray must hit every layer"
        lo, hi = ts[crossings[0]], ts[crossings[0] + 1]
        flo = f[crossings[0]]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = scene.scalar_field(camera.position + mid * d) - level
            if abs(fm) <= 1e-12:
                break
            if fm * flo > 0:
                lo, flo = mid, fm
            else:
                hi = mid
        hit = camera.position + mid * d

        rel = hit - scene.center
        rel = rel / np.linalg.norm(rel)
        uv = np.array(
            [math.atan2(rel[0], rel[2]) / (math.pi / 2), math.asin(rel[1]) / (math.pi / 2)]
        )
        du = np.zeros(2)
        for j, gen in enumerate(scene.warp_generators[li]):
            du = du + gamma[j] * np.asarray(gen(uv[None]))[0]
        uvw = uv + du
        rgb = np.zeros(3)
        alpha = 0.0
        for k, gen in enumerate(scene.texture_generators[li]):
            c, a, _s = gen(uvw[None])
            rgb = rgb + beta[k] * np.asarray(c)[0]
            alpha = alpha + beta[k] * float(np.asarray(a)[0])
        alpha = min(max(alpha, 0.0), 1.0)
        color_accum = color_accum + trans * alpha * rgb
        trans = trans * (1.0 - alpha)
    return color_accum, trans


# Frozen from the independent tracer above (ellipsoid preset, seed 7, camera
# and params below); guards both the preset definition and the pipeline.
_FIXTURE_RGB = (0.50380849, 0.49489794, 0.45113689)
_FIXTURE_TRANSMITTANCE = 2.66426328e-06


def fixture_inputs():
    scene = ellipsoid_scene()
    rng = np.random.default_rng(123)
    params = ExpressionParams(rng.normal(0.0, 0.4, scene.p))
    camera = Camera(
        position=(0.25, -0.1, 1.15), target=(0.0, 0.0, 0.0),
        fov_y=np.deg2rad(18.0), width=16, height=16,
    )
    return scene, params, camera


def test_hand_traced_pixel_matches_pipeline():
    scene, params, camera = fixture_inputs()
    img = oracle_render(scene, params, camera)
    row, col = 9, 4
    rgb, trans = _trace_pixel(scene, params, camera, row, col)
    np.testing.assert_allclose(img.rgb[row, col], rgb, atol=1e-6)
    assert img.transmittance[row, col] == pytest.approx(trans, abs=1e-6)
    np.testing.assert_allclose(rgb, _FIXTURE_RGB, atol=1e-6)
    assert trans == pytest.approx(_FIXTURE_TRANSMITTANCE, abs=1e-8)


def test_selector_params_reproduce_single_basis():
    scene = ellipsoid_scene(layers=2, warps=2, textures=3, p=4)
    k = 1
    tex_matrix = np.zeros((3, 5))
    tex_matrix[k, 4] = 1.0  # beta = e_k, gamma = 0
    selector = replace(
        scene, mapper=BlendMapper(warp_matrix=np.zeros((2, 5)), tex_matrix=tex_matrix)
    )
    only_k = replace(
        scene,
        texture_generators=[[gens[k]] for gens in scene.texture_generators],
        mapper=BlendMapper(warp_matrix=np.zeros((2, 5)), tex_matrix=np.array([[0, 0, 0, 0, 1.0]])),
    )
    camera = Camera(position=(0, 0, 1.2), target=(0, 0, 0), fov_y=np.deg2rad(25), width=12, height=12)
    a = oracle_render(selector, ExpressionParams.zeros(4), camera)
    b = oracle_render(only_k, ExpressionParams.zeros(4), camera)
    np.testing.assert_allclose(a.rgb, b.rgb, atol=1e-12)
    np.testing.assert_allclose(a.transmittance, b.transmittance, atol=1e-12)


def test_view_independence_of_diffuse_scene():
    # With zero SH the color of a surface point does not depend on where the
    # camera sits along the ray: the central pixel of two cameras at
    # different distances sees the same layer points, so identical colors.
    scene = ellipsoid_scene(layers=3, warps=2, textures=2, p=3)
    params = ExpressionParams(np.full(3, 0.2))
    size = 17  # odd: the central pixel ray runs exactly along -z
    near_cam = Camera(position=(0, 0, 1.2), target=(0, 0, 0), fov_y=np.deg2rad(20), width=size, height=size)
    far_cam = Camera(position=(0, 0, 1.45), target=(0, 0, 0), fov_y=np.deg2rad(20), width=size, height=size)
    a = oracle_render(scene, params, near_cam)
    b = oracle_render(scene, params, far_cam)
    c = size // 2
    np.testing.assert_allclose(a.rgb[c, c], b.rgb[c, c], atol=1e-6)


def test_camera_rays_through_pixel_centers():
    camera = Camera(position=(0, 0, 2.0), target=(0, 0, 0), fov_y=np.deg2rad(90), width=2, height=2)
    origin, dirs = camera_rays(camera)
    np.testing.assert_array_equal(origin, [0, 0, 2.0])
    # fov 90: pixel centers at ndc +-0.5, so direction slope 0.5 off-axis.
    expected = np.array([-0.5, 0.5, -1.0])
    expected /= np.linalg.norm(expected)
    np.testing.assert_allclose(dirs[0, 0], expected, atol=1e-12)
