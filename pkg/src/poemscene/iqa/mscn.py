"""Mean-subtracted contrast-normalized (MSCN) coefficients.

The base feature of the no-reference metrics: Ihat = (I - u) / (sigma + C)
where u is a Gaussian-blurred local mean, sigma the local deviation
sqrt(W * (I - u)^2), W a 7x7 Gaussian window (sigma 7/6) normalized to
sum 1, and C a stabilizer (1.0 on the internal [0, 255] luminance scale).
Boundaries reflect symmetrically.  MSCN values are signed, so they are
returned as plain arrays rather than image buffers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from ..geometry import ImageBuffer

__all__ = ["MscnConfig", "gaussian_window", "to_luminance", "mscn_field", "mscn"]

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class MscnConfig:
    window_size: int = 7
    sigma: float = 7.0 / 6.0
    c: float = 1.0

    def __post_init__(self):
        if self.window_size % 2 != 1 or self.window_size < 3:
            raise ValueError("window_size must be an odd integer >= 3")
        if self.c <= 0:
            raise ValueError("stabilizer C must be positive")


def gaussian_window(cfg: MscnConfig = MscnConfig()) -> np.ndarray:
    """2D Gaussian window normalized to sum exactly 1."""
    half = cfg.window_size // 2
    r = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (r / cfg.sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def to_luminance(image) -> np.ndarray:
    """Grayscale plane on the [0, 255] scale from a buffer or array."""
    if isinstance(image, ImageBuffer):
        data = image.data.astype(np.float64)
        if image.channels == 3:
            return (data @ _LUMA) * 255.0
        return data[:, :, 0] * 255.0
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return (arr @ _LUMA) * 255.0
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    # heuristic: [0, 1]-scaled arrays get promoted to the [0, 255] scale
    if arr.size and arr.max() <= 1.0:
        return arr * 255.0
    return arr


def mscn_field(image, cfg: MscnConfig = MscnConfig()):
    """(mscn, local_deviation) arrays for a grayscale image."""
    lum = to_luminance(image)
    w = gaussian_window(cfg)
    mu = correlate(lum, w, mode="reflect")
    dev = correlate((lum - mu) ** 2, w, mode="reflect")
    sigma = np.sqrt(np.maximum(dev, 0.0))
    return (lum - mu) / (sigma + cfg.c), sigma


def mscn(image, cfg: MscnConfig = MscnConfig()) -> np.ndarray:
    """MSCN coefficient field (signed, roughly unit scale)."""
    return mscn_field(image, cfg)[0]
