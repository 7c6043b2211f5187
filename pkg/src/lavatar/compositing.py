"""Front-to-back alpha compositing of ordered layers.

Layer i receives weight ``w_i = alpha_i * prod_{j<i} (1 - alpha_j)`` and the
left-over transmittance ``prod_i (1 - alpha_i)`` is reported so callers can
blend a background.  The weights and the residual always sum to one.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["composite", "composite_stack", "layer_weights"]


def layer_weights(alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Front-to-back weights and residual transmittance for alphas (N, ...)."""
    a = np.asarray(alphas, dtype=np.float64)
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError("alphas must lie in [0, 1]")
    trans_before = np.cumprod(1.0 - a, axis=0)
    shifted = np.concatenate(
        [np.ones_like(a[:1]), trans_before[:-1]], axis=0
    )
    weights = a * shifted
    residual = trans_before[-1] if a.shape[0] else np.ones(a.shape[1:])
    return weights, residual


def composite_stack(alphas: np.ndarray, colors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Composite colors (N, ..., C) under alphas (N, ...) ordered near-to-far.

    Returns (rgb (..., C), residual_transmittance (...)).
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64)
    weights, residual = layer_weights(alphas)
    rgb = np.sum(weights[..., None] * colors, axis=0)
    return rgb, residual


def composite(per_layer: Sequence[tuple[float, np.ndarray]]) -> tuple[np.ndarray, float]:
    """Composite an ordered near-to-far list of (alpha, rgb) pairs."""
    if not per_layer:
        raise ValueError("composite needs at least one layer")
    alphas = np.array([a for a, _ in per_layer], dtype=np.float64)
    colors = np.array([np.asarray(c, dtype=np.float64) for _, c in per_layer])
    rgb, residual = composite_stack(alphas, colors)
    return rgb, float(residual)
