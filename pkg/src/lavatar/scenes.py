"""Analytic layered scenes used to bake avatar assets at desk scale.

A scene bundles a smooth scalar field whose level sets form nested shells,
procedural warp/texture generators per layer, and a blend mapper.  Level
values are increasing and, by construction of the presets, map to shells of
decreasing radius: the first level is the outermost shell, i.e. the one a
front-hemisphere ray hits first.

Generators are vectorized callables over UV batches; texture generators
return ``(rgb, alpha, spec_or_None)``.  All preset randomness is drawn
eagerly from a seeded generator, so identical construction arguments yield
bit-identical scenes and bakes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .sh import NUM_SPEC_COEFFS
from .types import BlendMapper

__all__ = [
    "AnalyticScene",
    "BakeConfig",
    "make_scene",
    "ellipsoid_scene",
    "spheres_scene",
    "minimal_scene",
    "SCENE_PRESETS",
]

WarpGenerator = Callable[[np.ndarray], np.ndarray]
TextureGenerator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray | None]]


@dataclass
class AnalyticScene:
    """Layered implicit scene with procedural appearance."""

    name: str
    scalar_field: Callable[[np.ndarray], np.ndarray]  # (..., 3) -> (...)
    level_values: np.ndarray  # (N,) increasing; level i is layer i (near first)
    center: np.ndarray  # (3,)
    warp_generators: list[list[WarpGenerator]]  # [N][W]
    texture_generators: list[list[TextureGenerator]]  # [N][T]
    mapper: BlendMapper
    bound_radius: float = 1.0  # rays start this far from the center
    has_specular: bool = False

    def __post_init__(self):
        self.level_values = np.asarray(self.level_values, dtype=np.float64).reshape(-1)
        if self.level_values.size == 0:
            raise ValueError("scene needs at least one level")
        if np.any(np.diff(self.level_values) <= 0):
            raise ValueError("level values must be strictly increasing")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        n = self.level_values.shape[0]
        if len(self.warp_generators) != n or len(self.texture_generators) != n:
            raise ValueError("need one generator list per layer")

    @property
    def num_layers(self) -> int:
        return self.level_values.shape[0]

    @property
    def num_warps(self) -> int:
        return len(self.warp_generators[0])

    @property
    def num_textures(self) -> int:
        return len(self.texture_generators[0])

    @property
    def p(self) -> int:
        return self.mapper.p


@dataclass(frozen=True)
class BakeConfig:
    """Discretization settings for asset export."""

    grid_res: int = 512
    tex_res: int = 512
    warp_res: int | None = None  # defaults to tex_res
    include_specular: bool = False
    # Front hemisphere: azimuth x elevation ranges, radians.
    azimuth_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    elevation_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)

    def __post_init__(self):
        if self.grid_res < 2:
            raise ValueError("grid_res must be >= 2")
        if self.tex_res < 2:
            raise ValueError("tex_res must be >= 2")
        if self.warp_res is not None and self.warp_res < 2:
            raise ValueError("warp_res must be >= 2")

    @property
    def effective_warp_res(self) -> int:
        return self.tex_res if self.warp_res is None else self.warp_res


# ---------------------------------------------------------------------------
# Generator factories
# ---------------------------------------------------------------------------


def _zero_warp(_uv: np.ndarray) -> np.ndarray:
    uv = np.asarray(_uv, dtype=np.float64)
    return np.zeros(uv.shape[:-1] + (2,))


def _constant_warp(delta: np.ndarray) -> WarpGenerator:
    delta = np.asarray(delta, dtype=np.float64).reshape(2)

    def gen(uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=np.float64)
        return np.broadcast_to(delta, uv.shape[:-1] + (2,)).copy()

    return gen


def _sine_warp(amp: float, freq_u: float, freq_v: float, phase_u: float, phase_v: float) -> WarpGenerator:
    def gen(uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=np.float64)
        u, v = uv[..., 0], uv[..., 1]
        du = amp * np.sin(math.pi * (freq_u * u + phase_u)) * np.cos(math.pi * (freq_v * v + phase_v))
        dv = amp * np.cos(math.pi * (freq_u * u + phase_v)) * np.sin(math.pi * (freq_v * v + phase_u))
        return np.stack([du, dv], axis=-1)

    return gen


def _flat_texture(rgb: Sequence[float], alpha: float, spec_amp: float = 0.0) -> TextureGenerator:
    rgb = np.asarray(rgb, dtype=np.float64).reshape(3)

    def gen(uv: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        uv = np.asarray(uv, dtype=np.float64)
        shape = uv.shape[:-1]
        color = np.broadcast_to(rgb, shape + (3,)).copy()
        a = np.full(shape, alpha)
        spec = None
        if spec_amp != 0.0:
            spec = np.zeros(shape + (NUM_SPEC_COEFFS, 3))
            spec[..., 1, :] = spec_amp  # Y(1,0): brighter toward +z views
        return color, a, spec

    return gen


def _smooth_texture(
    base_rgb: np.ndarray,
    amp_rgb: np.ndarray,
    freqs: np.ndarray,
    phases: np.ndarray,
    base_alpha: float,
    amp_alpha: float,
    spec: np.ndarray | None,
) -> TextureGenerator:
    """Band-limited sinusoidal texture; values stay inside [0, 1] by construction."""

    def gen(uv: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        uv = np.asarray(uv, dtype=np.float64)
        u, v = uv[..., 0], uv[..., 1]
        waves = np.sin(math.pi * (freqs[:, 0] * u[..., None] + phases[:, 0])) * np.cos(
            math.pi * (freqs[:, 1] * v[..., None] + phases[:, 1])
        )  # (..., 4): three color waves plus one alpha wave
        color = base_rgb + amp_rgb * waves[..., :3]
        a = base_alpha + amp_alpha * waves[..., 3]
        spec_out = None
        if spec is not None:
            spec_out = np.broadcast_to(spec, uv.shape[:-1] + (NUM_SPEC_COEFFS, 3)).copy()
        return color, a, spec_out

    return gen


def _checker_texture(squares: int, rgb_a: Sequence[float], rgb_b: Sequence[float], alpha: float) -> TextureGenerator:
    rgb_a = np.asarray(rgb_a, dtype=np.float64)
    rgb_b = np.asarray(rgb_b, dtype=np.float64)

    def gen(uv: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        uv = np.asarray(uv, dtype=np.float64)
        cell = np.floor((uv + 1.0) * 0.5 * squares).astype(np.int64)
        cell = np.minimum(cell, squares - 1)
        parity = (cell[..., 0] + cell[..., 1]) % 2
        color = np.where(parity[..., None] == 0, rgb_a, rgb_b)
        return color, np.full(uv.shape[:-1], alpha), None

    return gen


def _radial_texture(base: Sequence[float], gain: float, alpha: float) -> TextureGenerator:
    base = np.asarray(base, dtype=np.float64)

    def gen(uv: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        uv = np.asarray(uv, dtype=np.float64)
        r = np.linalg.norm(uv, axis=-1) / math.sqrt(2.0)
        color = base + gain * (1.0 - r)[..., None]
        return color, np.full(uv.shape[:-1], alpha), None

    return gen


# ---------------------------------------------------------------------------
# Preset scenes
# ---------------------------------------------------------------------------


def _preset_mapper(rng: np.random.Generator, num_warps: int, num_textures: int, p: int) -> BlendMapper:
    # Entries are drawn as float32 so the mapper survives container round
    # trips bit-exactly.  Texture offsets form a convex-ish base mix, warp
    # offsets are small; the linear parts gently modulate both.
    warp = np.zeros((num_warps, p + 1), dtype=np.float32)
    tex = np.zeros((num_textures, p + 1), dtype=np.float32)
    warp[:, :p] = (rng.standard_normal((num_warps, p)) * 0.012).astype(np.float32)
    tex[:, :p] = (rng.standard_normal((num_textures, p)) * 0.012).astype(np.float32)
    warp[:, p] = (0.15 * np.exp(-np.arange(num_warps) / 4.0)).astype(np.float32)
    base = np.exp(-np.arange(num_textures) / 5.0)
    tex[:, p] = (base / base.sum()).astype(np.float32)
    return BlendMapper(warp_matrix=warp, tex_matrix=tex)


def _layer_alpha(layer: int, num_layers: int) -> float:
    # Deeper shells are more opaque so compositing converges well before the
    # last layer.
    if num_layers == 1:
        return 0.85
    return 0.35 + 0.5 * layer / (num_layers - 1)


def _build_generators(
    rng: np.random.Generator,
    num_layers: int,
    num_warps: int,
    num_textures: int,
    texture_style: str,
    warp_style: str,
    specular: bool,
) -> tuple[list[list[WarpGenerator]], list[list[TextureGenerator]]]:
    warp_gens: list[list[WarpGenerator]] = []
    tex_gens: list[list[TextureGenerator]] = []
    for layer in range(num_layers):
        row_w: list[WarpGenerator] = []
        for _ in range(num_warps):
            if warp_style == "zero":
                row_w.append(_zero_warp)
            elif warp_style == "drift":
                row_w.append(_constant_warp(rng.uniform(-0.03, 0.03, size=2)))
            elif warp_style == "sine":
                row_w.append(
                    _sine_warp(
                        amp=float(rng.uniform(0.015, 0.035)),
                        freq_u=float(rng.uniform(0.4, 1.0)),
                        freq_v=float(rng.uniform(0.4, 1.0)),
                        phase_u=float(rng.uniform(0.0, 2.0)),
                        phase_v=float(rng.uniform(0.0, 2.0)),
                    )
                )
            else:
                raise ValueError(f"unknown warp style {warp_style!r}")
        warp_gens.append(row_w)

        base_alpha = _layer_alpha(layer, num_layers)
        row_t: list[TextureGenerator] = []
        for k in range(num_textures):
            if texture_style == "flat":
                palette = np.array([0.25, 0.5, 0.75])
                color = np.roll(palette, k)[:3] * (0.6 + 0.4 * (layer + 1) / num_layers)
                row_t.append(_flat_texture(color, base_alpha, 0.1 if specular else 0.0))
            elif texture_style == "checker":
                row_t.append(
                    _checker_texture(
                        4 + (k % 3) * 2,
                        rng.uniform(0.2, 0.8, size=3),
                        rng.uniform(0.2, 0.8, size=3),
                        base_alpha,
                    )
                )
            elif texture_style == "radial":
                row_t.append(_radial_texture(rng.uniform(0.2, 0.6, size=3), 0.3, base_alpha))
            elif texture_style == "smooth":
                spec = None
                if specular:
                    spec = np.zeros((NUM_SPEC_COEFFS, 3))
                    # A couple of gentle view-dependent lobes.
                    spec[1] = rng.uniform(0.02, 0.08, size=3)
                    spec[5] = rng.uniform(-0.05, 0.05, size=3)
                row_t.append(
                    _smooth_texture(
                        base_rgb=rng.uniform(0.3, 0.7, size=3),
                        amp_rgb=rng.uniform(0.05, 0.18, size=3),
                        freqs=rng.uniform(0.3, 1.4, size=(4, 2)),
                        phases=rng.uniform(0.0, 2.0, size=(4, 2)),
                        base_alpha=base_alpha,
                        amp_alpha=float(rng.uniform(0.04, 0.1)),
                        spec=spec,
                    )
                )
            else:
                raise ValueError(f"unknown texture style {texture_style!r}")
        tex_gens.append(row_t)
    return warp_gens, tex_gens


def _ellipsoid_field(center: np.ndarray, axes: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    inv_axes = 1.0 / axes

    def field(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        scaled = (pts - center) * inv_axes
        return 1.0 - np.linalg.norm(scaled, axis=-1)

    return field


def ellipsoid_scene(
    layers: int = 12,
    warps: int = 12,
    textures: int = 12,
    p: int = 63,
    seed: int = 7,
    specular: bool = False,
    texture_style: str = "smooth",
    warp_style: str = "sine",
    outer_radius: float = 0.55,
    inner_radius: float = 0.35,
    axes: Sequence[float] = (1.0, 0.9, 0.82),
    center: Sequence[float] = (0.0, 0.0, 0.0),
    bound_radius: float = 1.0,
) -> AnalyticScene:
    """Nested ellipsoid shells; the default desk-scale avatar stand-in."""
    center = np.asarray(center, dtype=np.float64)
    axes = np.asarray(axes, dtype=np.float64)
    radii = np.linspace(outer_radius, inner_radius, layers)  # near-to-far
    levels = 1.0 - radii  # increasing
    rng = np.random.default_rng(seed)
    warp_gens, tex_gens = _build_generators(
        rng, layers, warps, textures, texture_style, warp_style, specular
    )
    mapper = _preset_mapper(rng, warps, textures, p)
    return AnalyticScene(
        name="ellipsoid",
        scalar_field=_ellipsoid_field(center, axes),
        level_values=levels,
        center=center,
        warp_generators=warp_gens,
        texture_generators=tex_gens,
        mapper=mapper,
        bound_radius=bound_radius,
        has_specular=specular,
    )


def spheres_scene(
    radii: Sequence[float] = (2.0, 1.0),
    warps: int = 1,
    textures: int = 1,
    p: int = 2,
    seed: int = 3,
    texture_style: str = "flat",
    warp_style: str = "zero",
    center: Sequence[float] = (0.0, 0.0, 0.0),
    bound_radius: float | None = None,
    specular: bool = False,
) -> AnalyticScene:
    """Concentric spheres with simple textures; radii given near-to-far."""
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing (near-to-far)")
    center = np.asarray(center, dtype=np.float64)
    r0 = float(radii[0])
    levels = r0 + 1.0 - radii  # increasing, level i <-> radius radii[i]

    def field(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return r0 + 1.0 - np.linalg.norm(pts - center, axis=-1)

    n = radii.shape[0]
    rng = np.random.default_rng(seed)
    warp_gens, tex_gens = _build_generators(rng, n, warps, textures, texture_style, warp_style, specular)
    mapper = _preset_mapper(rng, warps, textures, p)
    return AnalyticScene(
        name="spheres",
        scalar_field=field,
        level_values=levels,
        center=center,
        warp_generators=warp_gens,
        texture_generators=tex_gens,
        mapper=mapper,
        bound_radius=r0 * 1.5 if bound_radius is None else bound_radius,
        has_specular=specular,
    )


def minimal_scene(seed: int = 1, specular: bool = False) -> AnalyticScene:
    """Two-sphere, two-basis scene for quick tests."""
    return spheres_scene(
        radii=(0.5, 0.4),
        warps=2,
        textures=2,
        p=4,
        seed=seed,
        texture_style="smooth",
        warp_style="sine",
        bound_radius=1.0,
        specular=specular,
    )


SCENE_PRESETS = {
    "ellipsoid": ellipsoid_scene,
    "spheres": spheres_scene,
    "minimal": minimal_scene,
}


def make_scene(preset: str = "ellipsoid", **kwargs) -> AnalyticScene:
    try:
        factory = SCENE_PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown scene preset {preset!r}") from None
    return factory(**kwargs)
