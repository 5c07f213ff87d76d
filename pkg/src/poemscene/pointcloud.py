"""Dense colored point clouds from panoramic RGB + depth.

Every panorama pixel contributes exactly one point at
``r(u, v) * pixel_to_ray(u, v)`` where r is the calibrated depth, so the
cloud has W*H points in raster order.  Clouds persist as binary
little-endian PLY with float32 x/y/z/red/green/blue properties (float
colors keep the round trip lossless).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GeometryError, PanoImage, pixel_to_ray

__all__ = [
    "PointCloud",
    "DepthCalibration",
    "calibrate_depth",
    "depth_pano_to_points",
    "subsample",
    "save_ply",
    "load_ply",
]


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) float32 in [0, 1]

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64))
        col = np.ascontiguousarray(np.asarray(self.colors, dtype=np.float32))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError(f"positions must be (N, 3), got {pos.shape}")
        if col.shape != pos.shape:
            raise GeometryError("colors must match positions count")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("point coordinates must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class DepthCalibration:
    """How raw backend depth maps become world-unit radii.

    affine-normalize maps the input [min, max] linearly onto [near, far]
    (the depth backends emit relative depth); metric-passthrough trusts
    the input as-is.
    """

    mode: str = "affine-normalize"
    near: float = 0.5
    far: float = 50.0

    def __post_init__(self):
        if self.mode not in ("affine-normalize", "metric-passthrough"):
            raise GeometryError(f"unknown calibration mode {self.mode!r}")
        if not (0.0 < self.near < self.far):
            raise GeometryError("calibration requires 0 < near < far")


def calibrate_depth(depth: PanoImage, calib: DepthCalibration) -> PanoImage:
    """Apply the calibration to a single-channel depth panorama."""
    if depth.buffer.channels != 1:
        raise GeometryError("depth panorama must be single-channel")
    if calib.mode == "metric-passthrough":
        return depth
    data = depth.data[:, :, 0].astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    if hi - lo < 1e-12:
        raise GeometryError("constant depth image cannot be affine-normalized")
    out = calib.near + (data - lo) * (calib.far - calib.near) / (hi - lo)
    from .geometry import ImageBuffer

    return PanoImage(ImageBuffer(out.astype(np.float32)[:, :, None]))


def depth_pano_to_points(
    rgb: PanoImage, depth: PanoImage, calib: DepthCalibration
) -> PointCloud:
    """Unproject every pixel along its panorama ray at calibrated depth."""
    if (rgb.width, rgb.height) != (depth.width, depth.height):
        raise GeometryError("rgb and depth panoramas must share dimensions")
    if rgb.buffer.channels != 3 or depth.buffer.channels != 1:
        raise GeometryError("expected 3-channel rgb and 1-channel depth")
    calibrated = calibrate_depth(depth, calib)
    r = calibrated.data[:, :, 0].astype(np.float64)
    if not np.all(np.isfinite(r)):
        raise GeometryError("depth must be finite")
    # radii below near are clamped so the exact-count invariant holds
    r = np.maximum(r, calib.near)
    w, h = rgb.width, rgb.height
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    rays = pixel_to_ray(w, h, uu, vv)
    pts = rays * r[:, :, None]
    return PointCloud(pts.reshape(-1, 3), rgb.data.reshape(-1, 3))


def subsample(cloud: PointCloud, stride: int) -> PointCloud:
    """Keep every stride-th point in raster order; stride=1 is identity."""
    if stride < 1:
        raise GeometryError("stride must be >= 1")
    if stride == 1:
        return cloud
    return PointCloud(cloud.positions[::stride], cloud.colors[::stride])


_PLY_HEADER = """ply
format binary_little_endian 1.0
element vertex {count}
property float x
property float y
property float z
property float red
property float green
property float blue
end_header
"""


def save_ply(cloud: PointCloud, path) -> None:
    rec = np.empty((cloud.count, 6), dtype="<f4")
    rec[:, :3] = cloud.positions
    rec[:, 3:] = cloud.colors
    with open(path, "wb") as f:
        f.write(_PLY_HEADER.format(count=cloud.count).encode("ascii"))
        f.write(rec.tobytes())


def load_ply(path) -> PointCloud:
    blob = Path(path).read_bytes()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise GeometryError("missing PLY header terminator")
    header = blob[:end].decode("ascii").splitlines()
    count = None
    props = []
    for line in header:
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
        elif line.startswith("property"):
            props.append(line.split()[-1])
    if count is None:
        raise GeometryError("PLY missing vertex element")
    if props[:6] != ["x", "y", "z", "red", "green", "blue"]:
        raise GeometryError(f"unsupported PLY property layout {props}")
    body = blob[end + len(b"end_header\n") :]
    rec = np.frombuffer(body, dtype="<f4", count=count * 6).reshape(count, 6)
    return PointCloud(rec[:, :3].astype(np.float64), rec[:, 3:])
