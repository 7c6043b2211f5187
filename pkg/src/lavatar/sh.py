"""Real spherical harmonics for view-dependent radiance.

The band-0 contribution is folded into the stored diffuse color, so the
8-bit diffuse map alone is a complete view-independent avatar.  The specular
block carries the 8 remaining coefficients of bands 1 and 2, evaluated with
the graphics-standard real SH basis (Condon-Shortley phase kept, as in the
usual rendering tables).
"""

from __future__ import annotations

import numpy as np

__all__ = ["NUM_SPEC_COEFFS", "sh_basis", "eval_sh"]

NUM_SPEC_COEFFS = 8

C1 = 0.4886025119029199  # sqrt(3 / (4 pi))
C2_0 = 1.0925484305920792  # sqrt(15 / (4 pi))
C2_1 = 0.31539156525252005  # sqrt(5 / (16 pi))
C2_2 = 0.5462742152960396  # sqrt(15 / (16 pi))


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Bands 1-2 of the real SH basis at unit directions (..., 3) -> (..., 8).

    Order: Y(1,-1), Y(1,0), Y(1,1), Y(2,-2), Y(2,-1), Y(2,0), Y(2,1), Y(2,2).
    """
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack(
        [
            -C1 * y,
            C1 * z,
            -C1 * x,
            C2_0 * x * y,
            -C2_0 * y * z,
            C2_1 * (3.0 * z * z - 1.0),
            -C2_0 * x * z,
            C2_2 * (x * x - y * y),
        ],
        axis=-1,
    )


def eval_sh(diffuse_rgb: np.ndarray, spec_coeffs: np.ndarray | None, view_dir: np.ndarray) -> np.ndarray:
    """Radiance toward ``view_dir``: diffuse plus the band-1/2 specular term.

    ``diffuse_rgb`` is (..., 3), ``spec_coeffs`` is (..., 8, 3) or None, and
    ``view_dir`` is (..., 3) with unit norm (checked to 1e-6).  The output is
    not clamped; clamping happens only at the final image write.
    """
    d = np.asarray(view_dir, dtype=np.float64)
    norms = np.linalg.norm(d, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= 1e-6):
        raise ValueError("view_dir must be normalized to 1e-6")
    diffuse = np.asarray(diffuse_rgb, dtype=np.float64)
    if spec_coeffs is None:
        return diffuse.copy()
    coeffs = np.asarray(spec_coeffs, dtype=np.float64)
    if coeffs.shape[-2:] != (NUM_SPEC_COEFFS, 3):
        raise ValueError("spec_coeffs must have shape (..., 8, 3)")
    basis = sh_basis(d)
    return diffuse + np.einsum("...s,...sc->...c", basis, coeffs)
