"""Continuous map lookup: bilinear sampling and UV warping.

The UV-to-texel convention is fixed package-wide: uv = (-1, -1) lands on the
center of texel (row 0, col 0), uv = (+1, +1) on the center of texel
(res-1, res-1), u along columns and v along rows.  Out-of-range coordinates
clamp to the edge.  The baker, oracle, rasterizer and viewer all rely on this
exact convention.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sample_bilinear", "warp_uv"]


def sample_bilinear(map_: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinearly sample ``map_`` (rows, cols[, channels]) at uv in [-1, 1]^2.

    ``uv`` may be a single (2,) point or any batch (..., 2); the result has
    shape (...,) per channel accordingly.
    """
    m = np.asarray(map_)
    if m.ndim == 2:
        m = m[..., None]
        squeeze_channel = True
    elif m.ndim == 3:
        squeeze_channel = False
    else:
        raise ValueError("map must be (rows, cols) or (rows, cols, channels)")
    rows, cols = m.shape[0], m.shape[1]
    if rows == 0 or cols == 0:
        raise ValueError("cannot sample an empty map")

    uv = np.asarray(uv, dtype=np.float64)
    single = uv.ndim == 1
    pts = np.atleast_2d(uv)
    if pts.shape[-1] != 2:
        raise ValueError("uv must have a trailing dimension of 2")

    x = (pts[..., 0] + 1.0) * 0.5 * (cols - 1)
    y = (pts[..., 1] + 1.0) * 0.5 * (rows - 1)
    x = np.clip(x, 0.0, cols - 1)
    y = np.clip(y, 0.0, rows - 1)

    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]

    top = m[y0, x0] * (1.0 - fx) + m[y0, x1] * fx
    bot = m[y1, x0] * (1.0 - fx) + m[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy

    if squeeze_channel:
        out = out[..., 0]
    if single:
        out = out[0]
    return out


def warp_uv(uv: np.ndarray, warp_map: np.ndarray) -> np.ndarray:
    """Offset canonical UVs by the blended warp map of one layer.

    The result is intentionally not clamped; the subsequent texture lookup
    clamps to the edge.
    """
    uv = np.asarray(uv, dtype=np.float64)
    return uv + sample_bilinear(warp_map, uv)
