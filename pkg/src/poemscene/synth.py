"""Deterministic procedural test imagery.

Dead-leaves composites (occluding random disks) approximate natural-image
statistics and back the shipped pristine set for the quality metrics;
value noise drives the offline generative-backend mocks.  Everything is a
pure function of its seed.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import ImageBuffer

__all__ = ["dead_leaves", "value_noise", "checkerboard", "noise_rgb"]


def dead_leaves(size: int, seed: int, n_disks: int = 900, texture: float = 0.04) -> np.ndarray:
    """Grayscale occlusion composite in [0, 1], (size, size)."""
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 0.5)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(n_disks):
        cx, cy = rng.uniform(0, size, 2)
        r = 2.0 * (rng.uniform(0.02, 1.0) ** -0.8)
        val = rng.uniform(0.05, 0.95)
        m = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        img[m] = val
    img = gaussian_filter(img, 0.6)
    if texture > 0:
        tex = gaussian_filter(rng.normal(0, 1, (size, size)), 1.2)
        img = img + texture * tex
    return np.clip(img, 0.0, 1.0)


def value_noise(height: int, width: int, seed: int, octaves: int = 4, base: int = 4) -> np.ndarray:
    """Smooth multi-octave value noise in [0, 1], (height, width)."""
    rng = np.random.default_rng(seed)
    out = np.zeros((height, width))
    amp, total = 1.0, 0.0
    for o in range(octaves):
        cells = base * (2**o)
        grid = rng.uniform(0, 1, (cells + 1, cells + 1))
        ys = np.linspace(0, cells, height, endpoint=False)
        xs = np.linspace(0, cells, width, endpoint=False)
        j0 = np.floor(ys).astype(int)
        i0 = np.floor(xs).astype(int)
        fy = (ys - j0)[:, None]
        fx = (xs - i0)[None, :]
        fy = fy * fy * (3 - 2 * fy)
        fx = fx * fx * (3 - 2 * fx)
        g00 = grid[np.ix_(j0, i0)]
        g01 = grid[np.ix_(j0, i0 + 1)]
        g10 = grid[np.ix_(j0 + 1, i0)]
        g11 = grid[np.ix_(j0 + 1, i0 + 1)]
        layer = g00 * (1 - fy) * (1 - fx) + g01 * (1 - fy) * fx + g10 * fy * (1 - fx) + g11 * fy * fx
        out += amp * layer
        total += amp
        amp *= 0.55
    return out / total


def noise_rgb(height: int, width: int, seed: int) -> ImageBuffer:
    """Colorful smooth noise image used by the mock generative backends."""
    chans = [value_noise(height, width, seed * 3 + c) for c in range(3)]
    return ImageBuffer(np.stack(chans, axis=-1).astype(np.float32))


def checkerboard(size: int, cell: int = 8, lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return lo + board * (hi - lo)
