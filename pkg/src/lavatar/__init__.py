"""Layered-mesh volumetric avatars: bake, encode, animate, render, stream."""

__version__ = "0.1.0"

from .blending import blend_maps, blend_weights
from .compositing import composite, composite_stack
from .sampling import sample_bilinear, warp_uv
from .sh import eval_sh
from .types import (
    AssetMeta,
    AvatarAsset,
    BlendMapper,
    BlendWeights,
    Camera,
    ExpressionParams,
    LayeredMesh,
    MeshLayer,
    TextureAtlas,
    WarpAtlas,
)

__all__ = [
    "__version__",
    "AssetMeta",
    "AvatarAsset",
    "BlendMapper",
    "BlendWeights",
    "Camera",
    "ExpressionParams",
    "LayeredMesh",
    "MeshLayer",
    "TextureAtlas",
    "WarpAtlas",
    "blend_maps",
    "blend_weights",
    "composite",
    "composite_stack",
    "eval_sh",
    "sample_bilinear",
    "warp_uv",
]
