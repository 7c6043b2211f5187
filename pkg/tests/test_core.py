"""Core math: weight mapping, blending, sampling, SH and compositing.

Derived expectations are computed by independent oracles inside the tests:
scalar bilinear interpolation, direct matrix arithmetic, trig-form spherical
harmonics, Monte-Carlo integration, and back-to-front over-compositing.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lavatar import (
    BlendMapper,
    BlendWeights,
    ExpressionParams,
    blend_maps,
    blend_weights,
    composite,
    composite_stack,
    eval_sh,
    sample_bilinear,
    warp_uv,
)
from lavatar.blending import blend_texture_maps, blend_warp_maps, quantize_rgba
from lavatar.compositing import layer_weights
from lavatar.sh import sh_basis
from lavatar.types import TextureAtlas, WarpAtlas


# ---------------------------------------------------------------------------
# blend_weights
# ---------------------------------------------------------------------------


def test_zero_params_isolate_affine_offset():
    rng = np.random.default_rng(0)
    mapper = BlendMapper(warp_matrix=rng.normal(size=(3, 6)), tex_matrix=rng.normal(size=(4, 6)))
    w = blend_weights(mapper, ExpressionParams.zeros(5))
    np.testing.assert_array_equal(w.gamma, mapper.warp_matrix[:, -1])
    np.testing.assert_array_equal(w.beta, mapper.tex_matrix[:, -1])


def test_identity_mapper_passes_unit_vector_through():
    p = 4
    warp = np.hstack([np.eye(p), np.zeros((p, 1))])
    mapper = BlendMapper(warp_matrix=warp, tex_matrix=warp)
    e1 = np.zeros(p)
    e1[0] = 1.0
    w = blend_weights(mapper, ExpressionParams(e1))
    np.testing.assert_allclose(w.gamma, e1)


def test_blend_weights_affine_against_direct_arithmetic():
    # Independent oracle: plain numpy matrix product on the interpolated input.
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = int(rng.integers(1, 8))
        mapper = BlendMapper(
            warp_matrix=rng.normal(size=(3, p + 1)), tex_matrix=rng.normal(size=(2, p + 1))
        )
        p1 = rng.normal(size=p)
        p2 = rng.normal(size=p)
        mixed = blend_weights(mapper, ExpressionParams(0.3 * p1 + 0.7 * p2))
        expected_gamma = mapper.warp_matrix @ np.concatenate([0.3 * p1 + 0.7 * p2, [1.0]])
        lhs = 0.3 * blend_weights(mapper, ExpressionParams(p1)).gamma + 0.7 * blend_weights(
            mapper, ExpressionParams(p2)
        ).gamma
        np.testing.assert_allclose(mixed.gamma, expected_gamma, atol=1e-6)
        np.testing.assert_allclose(mixed.gamma, lhs, atol=1e-6)


def test_blend_weights_rejects_wrong_p():
    mapper = BlendMapper(warp_matrix=np.zeros((2, 4)), tex_matrix=np.zeros((2, 4)))
    with pytest.raises(ValueError, match="p="):
        blend_weights(mapper, ExpressionParams.zeros(5))


# ---------------------------------------------------------------------------
# blend_maps
# ---------------------------------------------------------------------------


def _random_warp_atlas(rng, n=2, w=3, res=4):
    return WarpAtlas(maps=rng.uniform(-0.5, 0.5, size=(n, w, res, res, 2)).astype(np.float32))


def _random_texture_atlas(rng, n=2, t=3, res=4, specular=False):
    rgba = rng.integers(0, 256, size=(n, t, res, res, 4), dtype=np.uint8)
    spec = None
    if specular:
        spec = rng.normal(0, 0.1, size=(n, t, res, res, 8, 3)).astype(np.float16)
    return TextureAtlas(rgba=rgba, specular=spec)


def test_blend_maps_selector_weights_reproduce_basis():
    rng = np.random.default_rng(2)
    atlas = _random_warp_atlas(rng)
    e2 = np.array([0.0, 1.0, 0.0])
    out = blend_maps(atlas, e2)
    np.testing.assert_array_equal(out, atlas.maps[:, 1])

    tex = _random_texture_atlas(rng)
    blended = blend_maps(tex, e2)
    # Bit-exact after the dequantize/requantize round trip.
    np.testing.assert_array_equal(quantize_rgba(blended.rgba), tex.rgba[:, 1])


def test_blend_maps_zero_weights_zero_map():
    rng = np.random.default_rng(3)
    atlas = _random_warp_atlas(rng)
    np.testing.assert_array_equal(blend_maps(atlas, np.zeros(3)), 0.0)


def test_blend_maps_against_scalar_loop_oracle():
    rng = np.random.default_rng(4)
    atlas = _random_warp_atlas(rng, n=2, w=3, res=4)
    weights = rng.normal(size=3)
    out = blend_maps(atlas, weights)
    # Brute-force texel summation.
    for n in range(2):
        for y in range(4):
            for x in range(4):
                for c in range(2):
                    expected = sum(
                        weights[j] * float(atlas.maps[n, j, y, x, c]) for j in range(3)
                    )
                    assert abs(out[n, y, x, c] - expected) < 1e-6


def test_blend_texture_maps_clamps_alpha_only():
    rgba = np.full((1, 1, 2, 2, 4), 255, dtype=np.uint8)
    atlas = TextureAtlas(rgba=rgba)
    blended = blend_texture_maps(atlas, np.array([1.7]))
    assert np.all(blended.rgba[..., 3] == 1.0)
    np.testing.assert_allclose(blended.rgba[..., :3], 1.7, rtol=1e-6)


def test_blend_maps_dimension_mismatch():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError, match="weights"):
        blend_maps(_random_warp_atlas(rng), np.zeros(4))


# ---------------------------------------------------------------------------
# sample_bilinear / warp_uv
# ---------------------------------------------------------------------------


def _bilinear_reference(map_, u, v):
    """Independent scalar bilinear with the package's texel-center convention."""
    m = np.asarray(map_, dtype=np.float64)
    rows, cols = m.shape[:2]
    x = min(max((u + 1.0) / 2.0 * (cols - 1), 0.0), cols - 1.0)
    y = min(max((v + 1.0) / 2.0 * (rows - 1), 0.0), rows - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, cols - 1), min(y0 + 1, rows - 1)
    fx, fy = x - x0, y - y0
    top = m[y0, x0] * (1 - fx) + m[y0, x1] * fx
    bot = m[y1, x0] * (1 - fx) + m[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def test_sample_bilinear_texel_centers_and_constant():
    rng = np.random.default_rng(6)
    m = rng.normal(size=(3, 5, 2))
    for row in range(3):
        for col in range(5):
            uv = np.array([col / 4 * 2 - 1, row / 2 * 2 - 1])
            np.testing.assert_allclose(sample_bilinear(m, uv), m[row, col], atol=1e-12)
    const = np.full((4, 4), 3.25)
    for uv in rng.uniform(-1.5, 1.5, size=(10, 2)):
        assert sample_bilinear(const, uv) == pytest.approx(3.25)


def test_sample_bilinear_2x2_midpoint():
    m = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert sample_bilinear(m, np.array([0.0, 0.0])) == pytest.approx(1.5)


def test_sample_bilinear_clamps_to_edge():
    m = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert sample_bilinear(m, np.array([-5.0, -5.0])) == pytest.approx(0.0)
    assert sample_bilinear(m, np.array([5.0, 5.0])) == pytest.approx(3.0)


def test_warp_uv_zero_and_constant_maps():
    zero = np.zeros((4, 4, 2))
    uv = np.array([0.3, -0.2])
    np.testing.assert_allclose(warp_uv(uv, zero), uv)
    const = np.zeros((4, 4, 2))
    const[..., 0] = 0.1
    np.testing.assert_allclose(warp_uv(uv, const), uv + np.array([0.1, 0.0]), atol=1e-12)


def test_warp_uv_linear_ramp_matches_reference():
    res = 8
    ramp = np.zeros((res, res, 2))
    coords = np.linspace(-1, 1, res)
    ramp[..., 0] = 0.05 * coords[None, :]
    ramp[..., 1] = -0.03 * coords[:, None]
    rng = np.random.default_rng(7)
    for uv in rng.uniform(-1, 1, size=(3, 2)):
        expected = uv + _bilinear_reference(ramp, uv[0], uv[1])
        np.testing.assert_allclose(warp_uv(uv, ramp), expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sampling_linearity(seed):
    # sample(sum w_j map_j) == sum w_j sample(map_j), underwriting the
    # prebaked/fused renderer equivalence.
    rng = np.random.default_rng(seed)
    maps = rng.normal(size=(3, 5, 5, 2))
    w = rng.normal(size=3)
    uv = rng.uniform(-1.2, 1.2, size=2)
    lhs = sample_bilinear(np.einsum("j,jabc->abc", w, maps), uv)
    rhs = sum(w[j] * sample_bilinear(maps[j], uv) for j in range(3))
    np.testing.assert_allclose(lhs, rhs, atol=1e-5)


# ---------------------------------------------------------------------------
# eval_sh
# ---------------------------------------------------------------------------


def _sh_reference(direction):
    """Trig-form real SH (bands 1-2), constants derived from pi directly."""
    x, y, z = direction
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    st_, ct = math.sin(theta), math.cos(theta)
    c1 = math.sqrt(3.0 / (4.0 * math.pi))
    c20 = math.sqrt(15.0 / (4.0 * math.pi))
    c21 = math.sqrt(5.0 / (16.0 * math.pi))
    c22 = math.sqrt(15.0 / (16.0 * math.pi))
    return np.array(
        [
            -c1 * st_ * math.sin(phi),
            c1 * ct,
            -c1 * st_ * math.cos(phi),
            c20 * st_ * st_ * math.sin(phi) * math.cos(phi),
            -c20 * st_ * ct * math.sin(phi),
            c21 * (3.0 * ct * ct - 1.0),
            -c20 * st_ * ct * math.cos(phi),
            c22 * st_ * st_ * math.cos(2.0 * phi),
        ]
    )


def _uniform_directions(rng, count):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_eval_sh_zero_coeffs_is_diffuse():
    rng = np.random.default_rng(8)
    diffuse = np.array([0.2, 0.5, 0.7])
    for d in _uniform_directions(rng, 20):
        np.testing.assert_array_equal(eval_sh(diffuse, np.zeros((8, 3)), d), diffuse)
        np.testing.assert_array_equal(eval_sh(diffuse, None, d), diffuse)


def test_eval_sh_monte_carlo_mean_is_diffuse():
    # Bands >= 1 integrate to zero over the sphere.
    rng = np.random.default_rng(9)
    dirs = _uniform_directions(rng, 200_000)
    diffuse = np.array([0.3, 0.6, 0.1])
    coeffs = rng.normal(0, 0.5, size=(8, 3))
    vals = eval_sh(diffuse, coeffs, dirs)
    np.testing.assert_allclose(vals.mean(axis=0), diffuse, atol=1e-2)


def test_eval_sh_band1_antisymmetry():
    diffuse = np.array([0.5, 0.5, 0.5])
    coeffs = np.zeros((8, 3))
    coeffs[1, :] = 0.2  # Y(1,0)
    up = eval_sh(diffuse, coeffs, np.array([0.0, 0.0, 1.0]))
    down = eval_sh(diffuse, coeffs, np.array([0.0, 0.0, -1.0]))
    np.testing.assert_allclose(up + down, 2 * diffuse, atol=1e-12)
    np.testing.assert_allclose(up - diffuse, -(down - diffuse), atol=1e-12)


def test_sh_basis_matches_trig_reference():
    rng = np.random.default_rng(10)
    for d in _uniform_directions(rng, 50):
        np.testing.assert_allclose(sh_basis(d), _sh_reference(d), atol=1e-12)


def test_eval_sh_linear_in_coefficients():
    rng = np.random.default_rng(11)
    d = _uniform_directions(rng, 1)[0]
    diffuse = np.zeros(3)
    c1 = rng.normal(size=(8, 3))
    c2 = rng.normal(size=(8, 3))
    lhs = eval_sh(diffuse, 0.4 * c1 + 0.6 * c2, d)
    rhs = 0.4 * eval_sh(diffuse, c1, d) + 0.6 * eval_sh(diffuse, c2, d)
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_eval_sh_rejects_unnormalized_direction():
    with pytest.raises(ValueError, match="normalized"):
        eval_sh(np.zeros(3), np.zeros((8, 3)), np.array([0.0, 0.0, 2.0]))


# ---------------------------------------------------------------------------
# composite
# ---------------------------------------------------------------------------


def _over_backtofront(alphas, colors):
    """Independent oracle: classic back-to-front 'over' compositing."""
    color = np.zeros_like(np.asarray(colors[0], dtype=np.float64))
    trans = 1.0
    for a, c in list(zip(alphas, colors))[::-1]:
        color = a * np.asarray(c, dtype=np.float64) + (1.0 - a) * color
        trans *= 1.0 - a
    return color, trans


def test_composite_two_layer_hand_case():
    rgb, residual = composite([(0.5, np.array([1.0])), (0.5, np.array([0.0]))])
    assert rgb[0] == pytest.approx(0.5)
    assert residual == pytest.approx(0.25)
    weights, res = layer_weights(np.array([0.5, 0.5]))
    np.testing.assert_allclose(weights, [0.5, 0.25])


def test_composite_opaque_first_layer_occludes():
    alphas = np.array([1.0, 0.7, 0.3])
    weights, residual = layer_weights(alphas)
    np.testing.assert_allclose(weights, [1.0, 0.0, 0.0])
    assert residual == 0.0


def test_composite_matches_backtofront_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        alphas = rng.uniform(0, 1, size=12)
        colors = rng.uniform(0, 1, size=(12, 3))
        rgb, residual = composite_stack(alphas, colors)
        expected_rgb, expected_trans = _over_backtofront(alphas, colors)
        np.testing.assert_allclose(rgb, expected_rgb, atol=1e-6)
        assert residual == pytest.approx(expected_trans, abs=1e-6)
        weights, res = layer_weights(alphas)
        assert weights.sum() + res == pytest.approx(1.0, abs=1e-6)


def test_composite_rejects_bad_alpha():
    with pytest.raises(ValueError, match="0, 1"):
        composite([(1.2, np.zeros(3))])
    with pytest.raises(ValueError, match="0, 1"):
        composite([(-0.1, np.zeros(3))])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=16)
)
def test_partition_of_unity_property(alphas):
    weights, residual = layer_weights(np.array(alphas))
    assert abs(weights.sum() + residual - 1.0) <= 1e-6


def test_blend_weights_type_roundtrip():
    w = BlendWeights(gamma=[1.0, 2.0], beta=[3.0])
    assert w.gamma.shape == (2,) and w.beta.shape == (1,)
