"""Image file I/O and comparison metrics.

Raw dump formats (golden-test friendly, see FORMAT.md):
  framebuffer:  u32 width | u32 height | u8 channels | row-major u8 data
  transmittance sidecar: u32 width | u32 height | row-major f32 data
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "write_png",
    "read_png",
    "write_raw",
    "read_raw",
    "write_transmittance",
    "read_transmittance",
    "psnr",
]


def write_png(path, image: np.ndarray) -> None:
    im = Image.fromarray(np.asarray(image, dtype=np.uint8))
    if hasattr(path, "write"):
        im.save(path, format="PNG")
    else:
        im.save(str(path))


def read_png(path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return np.asarray(im.convert("RGB"))


def write_raw(path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim == 2:
        img = img[..., None]
    h, w, c = img.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<IIB", w, h, c))
        f.write(np.ascontiguousarray(img).tobytes())


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, c = struct.unpack_from("<IIB", data, 0)
    img = np.frombuffer(data, dtype=np.uint8, offset=9)
    if img.size != w * h * c:
        raise ValueError(f"raw dump holds {img.size} samples, expected {w * h * c}")
    return img.reshape(h, w, c)


def write_transmittance(path, trans: np.ndarray) -> None:
    t = np.asarray(trans, dtype=np.float32)
    h, w = t.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<II", w, h))
        f.write(np.ascontiguousarray(t).tobytes())


def read_transmittance(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h = struct.unpack_from("<II", data, 0)
    t = np.frombuffer(data, dtype="<f4", offset=8)
    if t.size != w * h:
        raise ValueError(f"transmittance dump holds {t.size} values, expected {w * h}")
    return t.reshape(h, w)


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None, peak: float = 1.0) -> float:
    """PSNR between images scaled to [0, peak]; math.inf for identical inputs.

    uint8 inputs are normalized by 255 first.  ``mask`` selects pixels
    (broadcast over channels).
    """
    def norm(x):
        x = np.asarray(x)
        if np.issubdtype(x.dtype, np.integer):
            return x.astype(np.float64) / 255.0
        return x.astype(np.float64)

    a = norm(a)
    b = norm(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    mse = float(np.mean(diff**2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
