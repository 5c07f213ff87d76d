import numpy as np
import pytest

from poemscene.geometry import ImageBuffer, PanoImage, pixel_to_ray


def sphere_pano(height: int, seed: int = 3, waves: int = 6, freq: float = 3.0) -> PanoImage:
    """Panorama sampled from a smooth function on the sphere.

    Band-limited in the angular sense (unlike rectangle noise, which has
    unbounded angular frequency at the poles), so resampling round trips
    are meaningful.
    """
    rng = np.random.default_rng(seed)
    w = 2 * height
    uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(height, dtype=float))
    d = pixel_to_ray(w, height, uu, vv)
    out = np.zeros((height, w, 3))
    for c in range(3):
        val = np.zeros((height, w))
        for _ in range(waves):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            val += rng.uniform(0.3, 1.0) * np.sin(
                freq * rng.uniform(0.5, 1.0) * (d @ axis) * np.pi + rng.uniform(0, 2 * np.pi)
            )
        out[..., c] = val
    out = (out - out.min()) / (out.max() - out.min())
    return PanoImage(ImageBuffer(out.astype(np.float32)))


@pytest.fixture
def smooth_sphere_pano():
    return sphere_pano(96, seed=33)
