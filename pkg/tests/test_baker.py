"""Baking: intersections, spherical mapping, mesh/map export, decimation."""

import math

import numpy as np
import pytest

from lavatar.baker import (
    bake_asset,
    bake_maps,
    bake_mesh,
    decimate,
    downsample_textures,
    hemisphere_direction,
    intersect_layer,
    intersect_levels,
    spherical_uv,
    texel_center_grid,
)
from lavatar.blending import dequantize_rgba
from lavatar.errors import BakeError, DegenerateSceneError
from lavatar.scenes import AnalyticScene, BakeConfig, ellipsoid_scene, spheres_scene
from lavatar.types import BlendMapper

from conftest import flat_layer_scene


def unit_sphere_scene():
    return spheres_scene(radii=(1.0,), p=1)


def two_sphere_scene():
    return spheres_scene(radii=(2.0, 1.0), p=1, bound_radius=3.0)


# ---------------------------------------------------------------------------
# intersect
# ---------------------------------------------------------------------------


def test_intersect_unit_sphere_head_on():
    scene = unit_sphere_scene()
    hit = intersect_layer(scene, origin=(0.0, 0.0, 3.0), direction=(0.0, 0.0, -1.0), layer=0)
    np.testing.assert_allclose(hit, [0.0, 0.0, 1.0], atol=1e-6)


def test_intersect_miss_returns_none():
    scene = unit_sphere_scene()
    assert intersect_layer(scene, (0.0, 5.0, 3.0), (0.0, 0.0, -1.0), 0) is None


def test_intersect_requires_unit_direction():
    scene = unit_sphere_scene()
    with pytest.raises(ValueError, match="normalized"):
        intersect_layer(scene, (0.0, 0.0, 3.0), (0.0, 0.0, -2.0), 0)


def test_intersect_matches_dense_scan_oracle():
    # 100 random front-hemisphere rays toward the ellipsoid preset; the
    # oracle scans 1e5 uniform steps and takes the first sign change.
    scene = ellipsoid_scene(layers=3, warps=1, textures=1, p=2)
    rng = np.random.default_rng(0)
    az = rng.uniform(-1.2, 1.2, size=100)
    el = rng.uniform(-1.2, 1.2, size=100)
    dirs = hemisphere_direction(az, el)
    origins = scene.center + scene.bound_radius * dirs
    ray_dirs = -dirs

    t_hits = intersect_levels(scene, origins, ray_dirs, 0.0, scene.bound_radius)
    steps = 100_000
    ts = np.linspace(0.0, scene.bound_radius, steps + 1)
    for li, level in enumerate(scene.level_values):
        for r in range(100):
            pts = origins[r] + ts[:, None] * ray_dirs[r]
            g = scene.scalar_field(pts) - level
            crossings = np.nonzero(g[:-1] * g[1:] <= 0)[0]
            assert crossings.size, "oracle found no crossing"
            t_first = ts[crossings[0]]
            t = t_hits[r, li]
            assert np.isfinite(t)
            hit = origins[r] + t * ray_dirs[r]
            assert abs(scene.scalar_field(hit[None])[0] - level) <= 1e-8
            assert abs(t - t_first) <= ts[1] - ts[0]


# ---------------------------------------------------------------------------
# spherical_uv
# ---------------------------------------------------------------------------


def test_spherical_uv_forward_axis():
    np.testing.assert_allclose(
        spherical_uv(np.array([0.0, 0.0, 2.0]), np.zeros(3)), [0.0, 0.0], atol=1e-12
    )


def test_spherical_uv_quarter_azimuth():
    p = np.array([math.sin(math.pi / 4), 0.0, math.cos(math.pi / 4)])
    np.testing.assert_allclose(spherical_uv(p, np.zeros(3)), [0.5, 0.0], atol=1e-12)


def test_spherical_uv_forward_trig_oracle():
    rng = np.random.default_rng(1)
    center = np.array([0.1, -0.2, 0.05])
    for _ in range(50):
        az = rng.uniform(-math.pi / 2, math.pi / 2)
        el = rng.uniform(-math.pi / 2, math.pi / 2)
        d = hemisphere_direction(az, el)
        uv = spherical_uv(center + 2.0 * d, center)
        np.testing.assert_allclose(uv, [az / (math.pi / 2), el / (math.pi / 2)], atol=1e-9)


def test_spherical_uv_rejects_center():
    with pytest.raises(ValueError, match="center"):
        spherical_uv(np.zeros(3), np.zeros(3))


# ---------------------------------------------------------------------------
# bake_mesh
# ---------------------------------------------------------------------------


def test_bake_mesh_two_spheres_grid2():
    scene = two_sphere_scene()
    mesh = bake_mesh(scene, BakeConfig(grid_res=2, tex_res=2))
    assert mesh.num_layers == 2
    # Layer 0 is the nearest shell (radius 2), layer 1 the deeper one.
    for li, radius in enumerate([2.0, 1.0]):
        lay = mesh.layers[li]
        assert lay.num_vertices == 4
        np.testing.assert_allclose(np.linalg.norm(lay.positions, axis=1), radius, atol=1e-6)
        assert lay.triangles.shape == (2, 3)


def test_bake_mesh_canonical_uv_matches_lattice():
    scene = two_sphere_scene()
    g = 5
    mesh = bake_mesh(scene, BakeConfig(grid_res=g, tex_res=2))
    coords = np.linspace(-1.0, 1.0, g)
    expect_u, expect_v = np.meshgrid(coords, coords)
    lattice_uv = np.stack([expect_u.ravel(), expect_v.ravel()], axis=-1)
    np.testing.assert_allclose(mesh.layers[0].canonical_uv, lattice_uv, atol=1e-9)
    # Away from the poles the stored UVs equal the spherical mapping of the
    # actual vertex positions (construction identity).
    ids = mesh.lattice_ids
    rows = ids // g
    interior = (rows != 0) & (rows != g - 1)
    uv_from_points = spherical_uv(mesh.layers[1].positions[interior], mesh.center)
    np.testing.assert_allclose(uv_from_points, lattice_uv[interior], atol=1e-6)


def test_bake_mesh_vertices_on_level_sets():
    scene = ellipsoid_scene(layers=3, warps=1, textures=1, p=2)
    mesh = bake_mesh(scene, BakeConfig(grid_res=64, tex_res=2))
    for li, level in enumerate(scene.level_values):
        f = scene.scalar_field(mesh.layers[li].positions)
        assert np.abs(f - level).max() <= 1e-8


def test_bake_mesh_nestedness():
    scene = ellipsoid_scene(layers=4, warps=1, textures=1, p=2)
    mesh = bake_mesh(scene, BakeConfig(grid_res=16, tex_res=2))
    dists = np.stack(
        [np.linalg.norm(lay.positions - mesh.center, axis=1) for lay in mesh.layers]
    )
    # Layer index runs near-to-far from the viewer: center distance decreases.
    assert np.all(np.diff(dists, axis=0) < 0)


def test_bake_mesh_determinism():
    scene = ellipsoid_scene(layers=2, warps=2, textures=2, p=3)
    cfg = BakeConfig(grid_res=12, tex_res=8)
    a = bake_asset(scene, cfg)
    scene2 = ellipsoid_scene(layers=2, warps=2, textures=2, p=3)
    b = bake_asset(scene2, cfg)
    for la, lb in zip(a.mesh.layers, b.mesh.layers):
        np.testing.assert_array_equal(la.positions, lb.positions)
    np.testing.assert_array_equal(a.warps.maps, b.warps.maps)
    np.testing.assert_array_equal(a.textures.rgba, b.textures.rgba)
    np.testing.assert_array_equal(a.mapper.warp_matrix, b.mapper.warp_matrix)


def test_bake_mesh_degenerate_scene_error():
    base = spheres_scene(radii=(0.5,), p=1)

    def half_field(pts):
        pts = np.asarray(pts, dtype=np.float64)
        r = np.linalg.norm(pts, axis=-1)
        # Shell exists only where y > 0.3: most lattice rays miss.
        return np.where(pts[..., 1] > 0.3, 1.5 - r, -10.0)

    scene = AnalyticScene(
        name="half",
        scalar_field=half_field,
        level_values=np.array([1.0]),
        center=np.zeros(3),
        warp_generators=base.warp_generators[:1],
        texture_generators=base.texture_generators[:1],
        mapper=base.mapper,
        bound_radius=1.0,
    )
    with pytest.raises(DegenerateSceneError, match="miss"):
        bake_mesh(scene, BakeConfig(grid_res=16, tex_res=2))


# ---------------------------------------------------------------------------
# bake_maps
# ---------------------------------------------------------------------------


def test_bake_maps_zero_warp_generator():
    scene = flat_layer_scene([((0.5, 0.5, 0.5), 1.0)])
    warps, _ = bake_maps(scene, BakeConfig(grid_res=2, tex_res=4))
    np.testing.assert_array_equal(warps.maps, 0.0)


def test_bake_maps_checkerboard_expected_texels():
    # 2x2 checker over a 4x4 map: expected parity from the procedural
    # definition, computed independently here.
    white, black = (0.8, 0.8, 0.8), (0.2, 0.2, 0.2)

    def checker(uv):
        uv = np.asarray(uv, dtype=np.float64)
        cell = np.minimum(np.floor((uv + 1.0) * 0.5 * 2).astype(int), 1)
        parity = (cell[..., 0] + cell[..., 1]) % 2
        rgb = np.where(parity[..., None] == 0, white, black)
        return rgb, np.ones(uv.shape[:-1]), None

    base = flat_layer_scene([((0, 0, 0), 1.0)])
    scene = AnalyticScene(
        name="checker",
        scalar_field=base.scalar_field,
        level_values=base.level_values,
        center=base.center,
        warp_generators=base.warp_generators,
        texture_generators=[[checker]],
        mapper=base.mapper,
        bound_radius=base.bound_radius,
    )
    _, tex = bake_maps(scene, BakeConfig(grid_res=2, tex_res=4))
    grid = texel_center_grid(4)
    cell = np.minimum(np.floor((grid + 1.0) * 0.5 * 2).astype(int), 1)
    parity = (cell[..., 0] + cell[..., 1]) % 2
    expected_r = np.where(parity == 0, round(0.8 * 255), round(0.2 * 255))
    np.testing.assert_array_equal(tex.rgba[0, 0, :, :, 0], expected_r)
    assert np.all(tex.rgba[0, 0, :, :, 3] == 255)


def test_bake_maps_match_generator_at_texel_centers():
    scene = ellipsoid_scene(layers=2, warps=2, textures=2, p=3)
    cfg = BakeConfig(grid_res=2, tex_res=8, warp_res=4)
    warps, tex = bake_maps(scene, cfg)
    uv_w = texel_center_grid(4)
    uv_t = texel_center_grid(8)
    for li in range(2):
        for j in range(2):
            direct = scene.warp_generators[li][j](uv_w)
            np.testing.assert_allclose(warps.maps[li, j], direct, atol=1e-6)
        for k in range(2):
            rgb, alpha, _ = scene.texture_generators[li][k](uv_t)
            got = dequantize_rgba(tex.rgba[li, k])
            assert np.abs(got[..., :3] - rgb).max() <= 0.5 / 255 + 1e-9
            assert np.abs(got[..., 3] - alpha).max() <= 0.5 / 255 + 1e-9


def test_bake_maps_nonfinite_generator_reports_location():
    base = flat_layer_scene([((0.5, 0.5, 0.5), 1.0)])

    def bad_warp(uv):
        uv = np.asarray(uv, dtype=np.float64)
        out = np.zeros(uv.shape[:-1] + (2,))
        out[0, 0, 0] = np.nan
        return out

    scene = AnalyticScene(
        name="bad",
        scalar_field=base.scalar_field,
        level_values=base.level_values,
        center=base.center,
        warp_generators=[[bad_warp]],
        texture_generators=base.texture_generators,
        mapper=base.mapper,
        bound_radius=base.bound_radius,
    )
    with pytest.raises(BakeError, match=r"layer 0 basis 0 .* texel"):
        bake_maps(scene, BakeConfig(grid_res=2, tex_res=4))


def test_bake_specular_maps():
    scene = ellipsoid_scene(layers=2, warps=1, textures=2, p=2, specular=True)
    _, tex = bake_maps(scene, BakeConfig(grid_res=2, tex_res=4, include_specular=True))
    assert tex.specular is not None
    assert tex.specular.shape == (2, 2, 4, 4, 8, 3)
    assert np.any(tex.specular != 0)


# ---------------------------------------------------------------------------
# decimate / downsample
# ---------------------------------------------------------------------------


def test_decimate_identity():
    scene = two_sphere_scene()
    mesh = bake_mesh(scene, BakeConfig(grid_res=4, tex_res=2))
    assert decimate(mesh, 4) is mesh


def test_decimate_4_to_2_keeps_corners():
    scene = two_sphere_scene()
    mesh = bake_mesh(scene, BakeConfig(grid_res=4, tex_res=2))
    small = decimate(mesh, 2)
    assert small.grid_res == (2, 2)
    corner_ids = np.array([0, 3, 12, 15], dtype=np.uint32)  # row-major corners of 4x4
    kept_src = mesh.lattice_ids.searchsorted(corner_ids)
    for li in range(2):
        np.testing.assert_array_equal(
            small.layers[li].positions, mesh.layers[li].positions[kept_src]
        )
        np.testing.assert_array_equal(
            small.layers[li].canonical_uv, mesh.layers[li].canonical_uv[kept_src]
        )
    assert small.layers[0].triangles.shape == (2, 3)


def test_decimate_rejects_non_divisor():
    scene = two_sphere_scene()
    mesh = bake_mesh(scene, BakeConfig(grid_res=6, tex_res=2))
    with pytest.raises(ValueError, match="divide"):
        decimate(mesh, 4)


def test_decimate_preserves_nestedness():
    scene = ellipsoid_scene(layers=3, warps=1, textures=1, p=2)
    mesh = bake_mesh(scene, BakeConfig(grid_res=16, tex_res=2))
    small = decimate(mesh, 4)  # validator enforces nesting on construction
    assert small.num_layers == 3
    assert small.num_vertices == 16


def test_texture_downsample_matches_low_res_bake():
    # Generators are band-limited, so baking at res/2 equals 2x2 box
    # filtering the full-res bake to within quantization.
    scene = ellipsoid_scene(layers=2, warps=1, textures=2, p=2)
    hi = bake_maps(scene, BakeConfig(grid_res=2, tex_res=16))[1]
    lo = bake_maps(scene, BakeConfig(grid_res=2, tex_res=8))[1]
    filtered = downsample_textures(hi, 2)
    got = dequantize_rgba(filtered.rgba).astype(np.float64)
    want = dequantize_rgba(lo.rgba).astype(np.float64)
    # Box filter of texel centers is offset half a low-res texel from the
    # low-res bake lattice; the presets are smooth enough that the two stay
    # within a few quantization steps plus that sampling offset.
    assert np.abs(got - want).max() <= 0.05


def test_downsample_rejects_bad_factor():
    scene = two_sphere_scene()
    _, tex = bake_maps(scene, BakeConfig(grid_res=2, tex_res=6))
    with pytest.raises(ValueError, match="divide"):
        downsample_textures(tex, 4)
