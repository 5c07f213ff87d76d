"""Real spherical-harmonic color basis, degrees 0..3.

Coefficient layout is band-major: index l*(l+1)+m over bands, each entry
holding an RGB triple.  Colors evaluate as clamp(sum_b basis_b(d) * c_b
+ 0.5, 0, 1); the +0.5 offset keeps a zero coefficient vector mid-gray.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "num_coeffs",
    "sh_basis",
    "sh_basis_grad",
    "eval_sh_color",
    "rgb_to_dc",
    "dc_to_rgb",
]

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

MAX_DEGREE = 3


def num_coeffs(degree: int) -> int:
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"sh degree must be 0..{MAX_DEGREE}")
    return (degree + 1) ** 2


def sh_basis(degree: int, dirs: np.ndarray) -> np.ndarray:
    """Basis values for unit directions; dirs (..., 3) -> (..., K)."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    out = np.empty(d.shape[:-1] + (num_coeffs(degree),), dtype=np.float64)
    out[..., 0] = C0
    if degree >= 1:
        out[..., 1] = -C1 * y
        out[..., 2] = C1 * z
        out[..., 3] = -C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = C2[0] * x * y
        out[..., 5] = C2[1] * y * z
        out[..., 6] = C2[2] * (2.0 * zz - xx - yy)
        out[..., 7] = C2[3] * x * z
        out[..., 8] = C2[4] * (xx - yy)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 9] = C3[0] * y * (3.0 * xx - yy)
        out[..., 10] = C3[1] * x * y * z
        out[..., 11] = C3[2] * y * (4.0 * zz - xx - yy)
        out[..., 12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[..., 13] = C3[4] * x * (4.0 * zz - xx - yy)
        out[..., 14] = C3[5] * z * (xx - yy)
        out[..., 15] = C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_grad(degree: int, dirs: np.ndarray) -> np.ndarray:
    """d(basis_k)/d(x, y, z) at unit directions; (..., K, 3)."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    zeros = np.zeros_like(x)
    k = num_coeffs(degree)
    g = np.zeros(d.shape[:-1] + (k, 3), dtype=np.float64)
    if degree >= 1:
        g[..., 1, 1] = -C1
        g[..., 2, 2] = C1
        g[..., 3, 0] = -C1
    if degree >= 2:
        g[..., 4, 0] = C2[0] * y
        g[..., 4, 1] = C2[0] * x
        g[..., 5, 1] = C2[1] * z
        g[..., 5, 2] = C2[1] * y
        g[..., 6, 0] = C2[2] * (-2.0 * x)
        g[..., 6, 1] = C2[2] * (-2.0 * y)
        g[..., 6, 2] = C2[2] * (4.0 * z)
        g[..., 7, 0] = C2[3] * z
        g[..., 7, 2] = C2[3] * x
        g[..., 8, 0] = C2[4] * (2.0 * x)
        g[..., 8, 1] = C2[4] * (-2.0 * y)
    if degree >= 3:
        g[..., 9, 0] = C3[0] * (6.0 * x * y)
        g[..., 9, 1] = C3[0] * (3.0 * x * x - 3.0 * y * y)
        g[..., 9, 2] = zeros
        g[..., 10, 0] = C3[1] * y * z
        g[..., 10, 1] = C3[1] * x * z
        g[..., 10, 2] = C3[1] * x * y
        g[..., 11, 0] = C3[2] * (-2.0 * x * y)
        g[..., 11, 1] = C3[2] * (4.0 * z * z - x * x - 3.0 * y * y)
        g[..., 11, 2] = C3[2] * (8.0 * y * z)
        g[..., 12, 0] = C3[3] * (-6.0 * x * z)
        g[..., 12, 1] = C3[3] * (-6.0 * y * z)
        g[..., 12, 2] = C3[3] * (6.0 * z * z - 3.0 * x * x - 3.0 * y * y)
        g[..., 13, 0] = C3[4] * (4.0 * z * z - 3.0 * x * x - y * y)
        g[..., 13, 1] = C3[4] * (-2.0 * x * y)
        g[..., 13, 2] = C3[4] * (8.0 * x * z)
        g[..., 14, 0] = C3[5] * (2.0 * x * z)
        g[..., 14, 1] = C3[5] * (-2.0 * y * z)
        g[..., 14, 2] = C3[5] * (x * x - y * y)
        g[..., 15, 0] = C3[6] * (3.0 * x * x - 3.0 * y * y)
        g[..., 15, 1] = C3[6] * (-6.0 * x * y)
    return g


def eval_sh_color(sh: np.ndarray, dirs: np.ndarray, degree: int, clamp: bool = True):
    """Evaluate SH color for coefficients sh (..., K, 3) at unit dirs (..., 3).

    Returns (color, raw) where color = clamp(raw + 0.5, 0, 1) if clamp.
    """
    basis = sh_basis(degree, dirs)  # (..., K)
    raw = np.einsum("...k,...kc->...c", basis, np.asarray(sh, dtype=np.float64)) + 0.5
    if clamp:
        return np.clip(raw, 0.0, 1.0), raw
    return raw, raw


def rgb_to_dc(rgb: np.ndarray) -> np.ndarray:
    """DC coefficients reproducing a target color under the +0.5 offset."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / C0


def dc_to_rgb(dc: np.ndarray) -> np.ndarray:
    return np.asarray(dc, dtype=np.float64) * C0 + 0.5
