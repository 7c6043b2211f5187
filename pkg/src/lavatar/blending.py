"""Affine weight mapping and linear basis blending.

Animation is a pair of linear operations: expression params map affinely to
blend weights, and the weights combine the warp/texture bases texel-wise.
The same weights apply to every layer.
"""

from __future__ import annotations

import numpy as np

from .types import (
    BlendedTexture,
    BlendMapper,
    BlendWeights,
    ExpressionParams,
    TextureAtlas,
    WarpAtlas,
)

__all__ = [
    "blend_weights",
    "blend_maps",
    "blend_warp_maps",
    "blend_texture_maps",
    "dequantize_rgba",
    "quantize_rgba",
]


def blend_weights(mapper: BlendMapper, params: ExpressionParams) -> BlendWeights:
    """Map expression params to (gamma, beta) via the mapper's affine matrices."""
    if params.p != mapper.p:
        raise ValueError(f"params have p={params.p}, mapper expects p={mapper.p}")
    homog = np.concatenate([params.values, [1.0]])
    return BlendWeights(
        gamma=mapper.warp_matrix @ homog,
        beta=mapper.tex_matrix @ homog,
    )


def dequantize_rgba(rgba_u8: np.ndarray) -> np.ndarray:
    """8-bit normalized storage to real values in [0, 1]."""
    return rgba_u8.astype(np.float32) / np.float32(255.0)


def quantize_rgba(rgba: np.ndarray) -> np.ndarray:
    """Real values to 8-bit normalized storage (round-to-nearest, clamped)."""
    return np.rint(np.clip(rgba, 0.0, 1.0) * 255.0).astype(np.uint8)


def blend_warp_maps(atlas: WarpAtlas, gamma: np.ndarray) -> np.ndarray:
    """Weighted sum of the warp basis; returns (N, res, res, 2) float32."""
    gamma = np.asarray(gamma, dtype=np.float64).reshape(-1)
    if gamma.shape[0] != atlas.basis_size:
        raise ValueError(
            f"got {gamma.shape[0]} warp weights for basis size {atlas.basis_size}"
        )
    out = np.einsum("j,njhwc->nhwc", gamma, atlas.maps.astype(np.float64))
    return out.astype(np.float32)


def blend_texture_maps(atlas: TextureAtlas, beta: np.ndarray) -> BlendedTexture:
    """Weighted sum of the texture basis after dequantization.

    Alpha is clamped to [0, 1] (beta may be negative); colors are left
    unclamped until the final image write.
    """
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != atlas.basis_size:
        raise ValueError(
            f"got {beta.shape[0]} texture weights for basis size {atlas.basis_size}"
        )
    rgba = np.einsum(
        "k,nkhwc->nhwc", beta, dequantize_rgba(atlas.rgba).astype(np.float64)
    ).astype(np.float32)
    rgba[..., 3] = np.clip(rgba[..., 3], 0.0, 1.0)
    spec = None
    if atlas.specular is not None:
        spec = np.einsum(
            "k,nkhwsc->nhwsc", beta, atlas.specular.astype(np.float64)
        ).astype(np.float32)
    return BlendedTexture(rgba=rgba, specular=spec)


def blend_maps(atlas: WarpAtlas | TextureAtlas, weights) -> np.ndarray | BlendedTexture:
    """Blend an atlas with a weight vector (dispatches on the atlas kind)."""
    if isinstance(atlas, WarpAtlas):
        return blend_warp_maps(atlas, weights)
    if isinstance(atlas, TextureAtlas):
        return blend_texture_maps(atlas, weights)
    raise TypeError(f"cannot blend {type(atlas).__name__}")
