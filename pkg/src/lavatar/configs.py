"""Plain-text fixtures: key=value configs and params CSV.

Scene and camera configs are diffable ``key = value`` files; ``#`` starts a
comment.  Params CSV holds one frame per row, p comma-separated reals.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .scenes import AnalyticScene, make_scene
from .types import Camera, ExpressionParams

__all__ = [
    "parse_kv",
    "load_scene_config",
    "load_camera_config",
    "load_params_csv",
    "save_params_csv",
]


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in value.replace(",", " ").split())


_SCENE_KEYS = {
    "layers": int,
    "warps": int,
    "textures": int,
    "p": int,
    "seed": int,
    "specular": lambda v: v.lower() in ("1", "true", "yes"),
    "texture_style": str,
    "warp_style": str,
    "outer_radius": float,
    "inner_radius": float,
    "bound_radius": float,
    "axes": _floats,
    "center": _floats,
    "radii": _floats,
}


def load_scene_config(path) -> AnalyticScene:
    kv = parse_kv(Path(path).read_text())
    preset = kv.pop("preset", "ellipsoid")
    kwargs = {}
    for key, value in kv.items():
        if key not in _SCENE_KEYS:
            raise ValueError(f"unknown scene config key {key!r}")
        kwargs[key] = _SCENE_KEYS[key](value)
    return make_scene(preset, **kwargs)


def load_camera_config(path, width: int | None = None, height: int | None = None) -> Camera:
    kv = parse_kv(Path(path).read_text())
    known = {"position", "target", "up", "fov_deg", "width", "height", "near", "far"}
    unknown = set(kv) - known
    if unknown:
        raise ValueError(f"unknown camera config keys {sorted(unknown)}")
    if "position" not in kv or "target" not in kv:
        raise ValueError("camera config needs position and target")
    return Camera(
        position=_floats(kv["position"]),
        target=_floats(kv["target"]),
        up=_floats(kv["up"]) if "up" in kv else (0.0, 1.0, 0.0),
        fov_y=math.radians(float(kv.get("fov_deg", 30.0))),
        width=width if width is not None else int(kv.get("width", 512)),
        height=height if height is not None else int(kv.get("height", 512)),
        near=float(kv.get("near", 0.05)),
        far=float(kv.get("far", 100.0)),
    )


def load_params_csv(path, expected_p: int | None = None) -> list[ExpressionParams]:
    rows = np.loadtxt(str(path), delimiter=",", ndmin=2, dtype=np.float64)
    if expected_p is not None and rows.shape[1] != expected_p:
        raise ValueError(f"params CSV has p={rows.shape[1]}, expected {expected_p}")
    return [ExpressionParams(row) for row in rows]


def save_params_csv(path, frames) -> None:
    rows = np.stack([f.values for f in frames])
    np.savetxt(str(path), rows, delimiter=",", fmt="%.9g")
