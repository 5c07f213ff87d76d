"""Training views: tangent targets plus jittered virtual cameras.

Virtual cameras copy a tangent camera and shift its position by a uniform
offset in [-base_range, base_range] * lam per axis, with lam running
through a strictly increasing schedule (default 1, 2, 4).  Their targets
come from forward-warping the panorama through its depth map (z-buffered
splatting, nearest-neighbour hole fill), since no real image exists at
the jittered viewpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..geometry import (
    GeometryError,
    ImageBuffer,
    PanoImage,
    PerspectiveCamera,
    pixel_to_ray,
    project_pano_to_view,
)

__all__ = [
    "PerturbationConfig",
    "TrainView",
    "perturb_camera",
    "warp_pano_to_camera",
    "build_training_set",
]


@dataclass(frozen=True)
class PerturbationConfig:
    base_range: float = 0.05
    lambdas: tuple = (1, 2, 4)
    views_per_stage: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.base_range <= 0:
            raise GeometryError("base_range must be positive")
        lams = tuple(self.lambdas)
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise GeometryError("lambdas must be strictly increasing")
        if self.views_per_stage < 0:
            raise GeometryError("views_per_stage must be >= 0")
        object.__setattr__(self, "lambdas", lams)


@dataclass(frozen=True)
class TrainView:
    camera: PerspectiveCamera
    target: ImageBuffer
    stage: Union[str, int]  # "tangent" or the lambda value

    def __post_init__(self):
        if (self.target.width, self.target.height) != (self.camera.width, self.camera.height):
            raise GeometryError("target dimensions must match the camera")


def perturb_camera(
    base: PerspectiveCamera,
    lam: float,
    rng: np.random.Generator,
    base_range: float = 0.05,
) -> PerspectiveCamera:
    """Jitter the camera position; orientation and intrinsics unchanged."""
    offset = rng.uniform(-base_range * lam, base_range * lam, size=3)
    return PerspectiveCamera(
        position=base.position + offset,
        orientation=base.orientation,
        fov_x=base.fov_x,
        width=base.width,
        height=base.height,
        near=base.near,
        far=base.far,
    )


def warp_pano_to_camera(
    rgb: PanoImage, depth_world: PanoImage, cam: PerspectiveCamera
) -> ImageBuffer:
    """Forward-warp panorama pixels (at their depth) into a moved camera.

    Z-buffered nearest-pixel splatting with deterministic tie-breaks
    (smaller depth wins, then smaller source raster index); holes take the
    value of the nearest written pixel.
    """
    h, w = rgb.height, rgb.width
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    rays = pixel_to_ray(w, h, uu, vv).reshape(-1, 3)
    r = depth_world.data[:, :, 0].astype(np.float64).reshape(-1)
    pts = rays * r[:, None]
    colors = rgb.data.reshape(-1, 3).astype(np.float64)

    wc = cam.rotation.T
    t = (pts - cam.position[None, :]) @ wc.T
    z = t[:, 2]
    ok = z > cam.near
    fx = cam.focal
    cx, cy = cam.width / 2.0, cam.height / 2.0
    px = np.full(len(z), -1, dtype=np.int64)
    py = np.full(len(z), -1, dtype=np.int64)
    px[ok] = np.floor(cx + fx * t[ok, 0] / z[ok]).astype(np.int64)
    py[ok] = np.floor(cy - fx * t[ok, 1] / z[ok]).astype(np.int64)
    ok &= (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)

    flat = py[ok] * cam.width + px[ok]
    zsrc = z[ok]
    src_idx = np.nonzero(ok)[0]

    n_pix = cam.width * cam.height
    zbuf = np.full(n_pix, np.inf)
    np.minimum.at(zbuf, flat, zsrc)
    winners = zsrc <= zbuf[flat]
    idx_buf = np.full(n_pix, np.iinfo(np.int64).max)
    np.minimum.at(idx_buf, flat[winners], src_idx[winners])

    out = np.zeros((n_pix, 3))
    written = idx_buf != np.iinfo(np.int64).max
    out[written] = colors[idx_buf[written]]

    if not written.all() and written.any():
        from scipy.ndimage import distance_transform_edt

        miss2d = ~written.reshape(cam.height, cam.width)
        _, (iy, ix) = distance_transform_edt(miss2d, return_indices=True)
        filled = out.reshape(cam.height, cam.width, 3)
        out = filled[iy, ix].reshape(n_pix, 3)

    return ImageBuffer(
        np.clip(out.reshape(cam.height, cam.width, 3), 0.0, 1.0).astype(np.float32)
    )


def build_training_set(
    rgb: PanoImage,
    depth_world: PanoImage,
    tangents,
    pcfg: PerturbationConfig,
):
    """20 tangent views plus `views_per_stage` jittered views per lambda."""
    views = [
        TrainView(cam, project_pano_to_view(rgb, cam), "tangent") for cam in tangents
    ]
    rng = np.random.default_rng(pcfg.seed)
    for lam in pcfg.lambdas:
        for i in range(pcfg.views_per_stage):
            base = tangents[i % len(tangents)]
            cam = perturb_camera(base, lam, rng, pcfg.base_range)
            target = warp_pano_to_camera(rgb, depth_world, cam)
            views.append(TrainView(cam, target, lam))
    return views
