"""Spherical/planar projection math shared by the whole engine.

Conventions (fixed; everything downstream assumes them):

    World frame      y-up, right-handed.
    Equirectangular  longitude theta = 2*pi*(u+0.5)/W - pi
                     latitude  phi   = pi/2 - pi*(v+0.5)/H
                     ray(theta, phi) = (cos(phi)*sin(theta), sin(phi),
                                        cos(phi)*cos(theta))
                     so pixel u grows eastward, row v=0 touches the north
                     pole, and the image centre looks along +Z.
    Pixel centres    integer coordinates: pixel (i, j) is centred at the
                     continuous coordinate (u=i, v=j); the +0.5 lives in
                     the formulas above.
    Sampling         bilinear, horizontal wrap, vertical clamp.
    Camera frame     x right, y up, z forward (optical axis).  The stored
                     quaternion rotates camera coordinates into world
                     coordinates.  Pixel (i, j) of a W x H image maps to
                     the camera-space ray ((i+0.5-W/2)/f, (H/2-j-0.5)/f, 1)
                     with f = (W/2)/tan(fov_x/2).

Cube-map face table (order +X, -X, +Y, -Y, +Z, -Z; direction for face
pixel at in-face coordinates a (right) and b (up), both in [-1, 1]):

    face  forward      right        up
    +X    ( 1, 0, 0)   (0, 0,-1)    (0, 1, 0)
    -X    (-1, 0, 0)   (0, 0, 1)    (0, 1, 0)
    +Y    ( 0, 1, 0)   (1, 0, 0)    (0, 0, 1)
    -Y    ( 0,-1, 0)   (1, 0, 0)    (0, 0,-1)
    +Z    ( 0, 0, 1)   (1, 0, 0)    (0, 1, 0)
    -Z    ( 0, 0,-1)   (-1,0, 0)    (0, 1, 0)

The "central" face used to condition panorama outpainting is the -Z face
(index 5): the back of the panorama, i.e. the seam-centred face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ImageBuffer",
    "PanoImage",
    "PerspectiveCamera",
    "CubeMap",
    "FRONT_FACE_INDEX",
    "pixel_to_ray",
    "ray_to_pixel",
    "sample_pano",
    "pano_to_cubemap",
    "cubemap_to_pano",
    "tangent_cameras",
    "project_pano_to_view",
    "resize_bilinear",
    "quat_normalize",
    "quat_to_matrix",
    "matrix_to_quat",
    "look_at_quat",
]


class GeometryError(ValueError):
    """Domain error for out-of-range coordinates or invalid shapes."""


# ---------------------------------------------------------------------------
# core image / camera types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major float raster, 1 (depth/gray) or 3 (color) channels.

    Color samples must be finite and in [0, 1]; depth samples finite and
    nonnegative (no upper bound).
    """

    data: np.ndarray  # (H, W, C) float32

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise GeometryError(f"expected (H, W, 1|3) array, got {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise GeometryError("image samples must be finite")
        if arr.shape[2] == 3 and (arr.min() < 0.0 or arr.max() > 1.0):
            raise GeometryError("color samples must lie in [0, 1]")
        if arr.shape[2] == 1 and arr.min() < 0.0:
            raise GeometryError("depth samples must be nonnegative")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @staticmethod
    def zeros(height: int, width: int, channels: int = 3) -> "ImageBuffer":
        return ImageBuffer(np.zeros((height, width, channels), dtype=np.float32))


@dataclass(frozen=True)
class PanoImage:
    """Equirectangular raster; width must be exactly twice the height."""

    buffer: ImageBuffer

    def __post_init__(self):
        if self.buffer.width != 2 * self.buffer.height:
            raise GeometryError(
                f"panorama must be 2:1, got {self.buffer.width}x{self.buffer.height}"
            )

    @property
    def width(self) -> int:
        return self.buffer.width

    @property
    def height(self) -> int:
        return self.buffer.height

    @property
    def data(self) -> np.ndarray:
        return self.buffer.data


@dataclass(frozen=True)
class PerspectiveCamera:
    """Pinhole camera: pose (position + world<-camera quaternion) and intrinsics."""

    position: np.ndarray  # (3,)
    orientation: np.ndarray  # (4,) quaternion (w, x, y, z), world <- camera
    fov_x: float  # radians
    width: int
    height: int
    near: float = 0.01
    far: float = 1000.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise GeometryError("orientation quaternion must be unit norm")
        if not (0.0 < self.near < self.far):
            raise GeometryError("camera requires 0 < near < far")
        if not (0.0 < self.fov_x < math.pi):
            raise GeometryError("fov_x must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise GeometryError("camera resolution must be positive")

    @property
    def focal(self) -> float:
        """Focal length in pixels (square pixels: shared by both axes)."""
        return (self.width / 2.0) / math.tan(self.fov_x / 2.0)

    @property
    def rotation(self) -> np.ndarray:
        """3x3 world<-camera rotation matrix."""
        return quat_to_matrix(self.orientation)

    def rays(self) -> np.ndarray:
        """Unit world-space ray directions for every pixel, shape (H, W, 3)."""
        f = self.focal
        xs = (np.arange(self.width) + 0.5 - self.width / 2.0) / f
        ys = (self.height / 2.0 - np.arange(self.height) - 0.5) / f
        xg, yg = np.meshgrid(xs, ys)
        d = np.stack([xg, yg, np.ones_like(xg)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return d @ self.rotation.T


FRONT_FACE_INDEX = 5  # the -Z face conditions outpainting

# rows: forward, right, up for faces (+X, -X, +Y, -Y, +Z, -Z)
_FACE_AXES = np.array(
    [
        [[1, 0, 0], [0, 0, -1], [0, 1, 0]],
        [[-1, 0, 0], [0, 0, 1], [0, 1, 0]],
        [[0, 1, 0], [1, 0, 0], [0, 0, 1]],
        [[0, -1, 0], [1, 0, 0], [0, 0, -1]],
        [[0, 0, 1], [1, 0, 0], [0, 1, 0]],
        [[0, 0, -1], [-1, 0, 0], [0, 1, 0]],
    ],
    dtype=np.float64,
)

FACE_NAMES = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")


@dataclass(frozen=True)
class CubeMap:
    """Six square faces in the fixed (+X, -X, +Y, -Y, +Z, -Z) order."""

    faces: tuple  # 6 ImageBuffers

    def __post_init__(self):
        faces = tuple(self.faces)
        if len(faces) != 6:
            raise GeometryError("cube map needs exactly 6 faces")
        size = faces[0].width
        for f in faces:
            if f.width != size or f.height != size:
                raise GeometryError("cube faces must be square and equal size")
        object.__setattr__(self, "faces", faces)

    @property
    def face_size(self) -> int:
        return self.faces[0].width

    @property
    def front(self) -> ImageBuffer:
        """The central (-Z) face used as outpainting conditioning."""
        return self.faces[FRONT_FACE_INDEX]


# ---------------------------------------------------------------------------
# quaternion helpers
# ---------------------------------------------------------------------------


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise GeometryError("cannot normalize zero quaternion")
    return q / n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix for unit quaternion (w, x, y, z): v_world = R @ v_cam."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a proper rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:  # canonical sign
        q = -q
    return q


def look_at_quat(forward: np.ndarray, up: np.ndarray) -> np.ndarray:
    """World<-camera quaternion for a camera looking along `forward`.

    `up` fixes the roll; it must not be parallel to `forward`.
    """
    f = np.asarray(forward, dtype=np.float64)
    f = f / np.linalg.norm(f)
    u = np.asarray(up, dtype=np.float64)
    r = np.cross(u, f)
    rn = np.linalg.norm(r)
    if rn < 1e-12:
        raise GeometryError("up vector parallel to forward")
    r = r / rn
    u = np.cross(f, r)
    return matrix_to_quat(np.stack([r, u, f], axis=1))


# ---------------------------------------------------------------------------
# equirectangular <-> ray
# ---------------------------------------------------------------------------


def pixel_to_ray(width: int, height: int, u, v) -> np.ndarray:
    """Unit ray direction(s) for continuous panorama coordinates (u, v).

    Accepts scalars or same-shape arrays; returns (..., 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(u >= width) or np.any(v < 0) or np.any(v >= height):
        raise GeometryError("pixel coordinates outside image domain")
    theta = 2.0 * np.pi * (u + 0.5) / width - np.pi
    phi = np.pi / 2.0 - np.pi * (v + 0.5) / height
    cphi = np.cos(phi)
    d = np.stack([cphi * np.sin(theta), np.sin(phi), cphi * np.cos(theta)], axis=-1)
    return d


def ray_to_pixel(direction: np.ndarray, width: int, height: int):
    """Continuous panorama coordinates (u, v) of unit direction(s).

    u is wrapped into [-0.5, width - 0.5); v lies in [-0.5, height - 0.5].
    """
    d = np.asarray(direction, dtype=np.float64)
    n = np.linalg.norm(d, axis=-1)
    if np.any(n < 1e-12):
        raise GeometryError("zero direction vector")
    if np.any(np.abs(n - 1.0) > 1e-6):
        raise GeometryError("direction must be unit length (within 1e-6)")
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    theta = np.arctan2(x, z)
    phi = np.arcsin(np.clip(y / n, -1.0, 1.0))
    u = np.mod((theta + np.pi) / (2.0 * np.pi) * width, width) - 0.5
    v = (np.pi / 2.0 - phi) / np.pi * height - 0.5
    return u, v


def sample_pano(pano: PanoImage, u, v) -> np.ndarray:
    """Bilinear panorama sample at continuous (u, v): wrap in u, clamp in v."""
    data = pano.data.astype(np.float64)
    h, w = pano.height, pano.width
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i0 = np.floor(u)
    j0 = np.floor(v)
    fu = u - i0
    fv = v - j0
    i0 = i0.astype(np.int64)
    j0 = j0.astype(np.int64)
    i1 = np.mod(i0 + 1, w)
    i0 = np.mod(i0, w)
    j1 = np.clip(j0 + 1, 0, h - 1)
    j0 = np.clip(j0, 0, h - 1)
    fu = fu[..., None]
    fv = fv[..., None]
    top = data[j0, i0] * (1 - fu) + data[j0, i1] * fu
    bot = data[j1, i0] * (1 - fu) + data[j1, i1] * fu
    return top * (1 - fv) + bot * fv


def _sample_face(face: np.ndarray, fx, fy) -> np.ndarray:
    """Bilinear sample of one cube face with edge clamping."""
    h, w = face.shape[:2]
    fx = np.clip(fx, 0.0, w - 1.0)
    fy = np.clip(fy, 0.0, h - 1.0)
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    i1 = np.clip(i0 + 1, 0, w - 1)
    j1 = np.clip(j0 + 1, 0, h - 1)
    gu = (fx - i0)[..., None]
    gv = (fy - j0)[..., None]
    top = face[j0, i0] * (1 - gu) + face[j0, i1] * gu
    bot = face[j1, i0] * (1 - gu) + face[j1, i1] * gu
    return top * (1 - gv) + bot * gv


# ---------------------------------------------------------------------------
# cube map
# ---------------------------------------------------------------------------


def pano_to_cubemap(pano: PanoImage, face_size: int) -> CubeMap:
    """Resample an equirectangular panorama onto six cube faces."""
    if face_size < 1:
        raise GeometryError("face_size must be >= 1")
    s = face_size
    a = (2.0 * (np.arange(s) + 0.5) / s) - 1.0  # in-face right coordinate
    b = 1.0 - 2.0 * (np.arange(s) + 0.5) / s  # in-face up coordinate (row 0 = top)
    ag, bg = np.meshgrid(a, b)
    faces = []
    for k in range(6):
        fwd, right, up = _FACE_AXES[k]
        d = (
            fwd[None, None, :]
            + ag[..., None] * right[None, None, :]
            + bg[..., None] * up[None, None, :]
        )
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        u, v = ray_to_pixel(d, pano.width, pano.height)
        vals = sample_pano(pano, u, v)
        faces.append(ImageBuffer(np.clip(vals, 0.0, None).astype(np.float32)))
    return CubeMap(tuple(faces))


def _direction_to_face_uv(d: np.ndarray):
    """Dominant-axis face index plus in-face pixel-space coordinates.

    Ties broken toward the lower face index (X over Y over Z).
    Returns (face_idx, a, b) with a, b in [-1, 1].
    """
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    ax, ay, az = np.abs(x), np.abs(y), np.abs(z)
    x_dom = (ax >= ay) & (ax >= az)
    y_dom = (~x_dom) & (ay >= az)
    z_dom = ~(x_dom | y_dom)
    dom = np.where(x_dom, ax, np.where(y_dom, ay, az))
    dom = np.maximum(dom, 1e-15)
    face = np.select(
        [x_dom & (x > 0), x_dom & (x <= 0), y_dom & (y > 0), y_dom & (y <= 0), z_dom & (z > 0)],
        [0, 1, 2, 3, 4],
        default=5,
    )
    xs, ys, zs = x / dom, y / dom, z / dom
    # a = dir . right, b = dir . up, both divided by |forward component| = 1
    a = np.select(
        [face == 0, face == 1, face == 2, face == 3, face == 4],
        [-zs, zs, xs, xs, xs],
        default=-xs,
    )
    b = np.select(
        [face == 0, face == 1, face == 2, face == 3, face == 4],
        [ys, ys, zs, -zs, ys],
        default=ys,
    )
    return face, a, b


def cubemap_to_pano(cube: CubeMap, width: int, height: int) -> PanoImage:
    """Resample six cube faces back onto an equirectangular panorama."""
    if width != 2 * height:
        raise GeometryError("panorama must be 2:1")
    s = cube.face_size
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    d = pixel_to_ray(width, height, uu, vv)
    face, a, b = _direction_to_face_uv(d)
    # face pixel coordinates: a in [-1,1] -> [-0.5, s-0.5]; clamped sample
    fx = (a + 1.0) * s / 2.0 - 0.5
    fy = (1.0 - b) * s / 2.0 - 0.5
    channels = cube.faces[0].channels
    out = np.zeros((height, width, channels), dtype=np.float64)
    for k in range(6):
        m = face == k
        if not np.any(m):
            continue
        vals = _sample_face(cube.faces[k].data.astype(np.float64), fx[m], fy[m])
        out[m] = vals
    return PanoImage(ImageBuffer(np.clip(out, 0.0, None).astype(np.float32)))


# ---------------------------------------------------------------------------
# icosahedral tangent cameras
# ---------------------------------------------------------------------------

_PHI = (1.0 + math.sqrt(5.0)) / 2.0


def _dodecahedron_vertices() -> np.ndarray:
    """20 unit directions through the faces of a regular icosahedron."""
    pts = []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                pts.append((sx, sy, sz))
    inv = 1.0 / _PHI
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            pts.append((0.0, s1 * inv, s2 * _PHI))
            pts.append((s1 * inv, s2 * _PHI, 0.0))
            pts.append((s1 * _PHI, 0.0, s2 * inv))
    pts = np.asarray(pts, dtype=np.float64)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    # deterministic ordering: by latitude then longitude
    order = np.lexsort((np.arctan2(pts[:, 0], pts[:, 2]), -pts[:, 1]))
    return pts[order]


DEFAULT_TANGENT_FOV = math.radians(75.0)


def tangent_cameras(
    n: int = 20,
    face_fov: float = DEFAULT_TANGENT_FOV,
    resolution: int = 256,
) -> list:
    """20 origin cameras whose optical axes pierce the icosahedron face centres.

    With the default 75 degree square fov the frusta jointly cover the whole
    sphere (the covering radius of the 20-direction layout is ~37.38 degrees,
    just under the 37.5 degree half-fov).  Only n=20 is supported.
    """
    if n != 20:
        raise GeometryError("only the 20-camera icosahedral layout is supported")
    axes = _dodecahedron_vertices()
    cams = []
    for fwd in axes:
        # roll reference: world up, except at the two poles of the layout
        up = np.array([0.0, 1.0, 0.0])
        if abs(fwd @ up) > 0.999:
            up = np.array([0.0, 0.0, 1.0])
        q = look_at_quat(fwd, up)
        cams.append(
            PerspectiveCamera(
                position=np.zeros(3),
                orientation=q,
                fov_x=face_fov,
                width=resolution,
                height=resolution,
            )
        )
    return cams


def frustum_contains(cam: PerspectiveCamera, directions: np.ndarray) -> np.ndarray:
    """Boolean mask of unit world directions inside the camera frustum."""
    d = np.asarray(directions, dtype=np.float64)
    local = d @ cam.rotation  # R^T rows applied: world -> camera
    t = math.tan(cam.fov_x / 2.0)
    ty = t * cam.height / cam.width
    z = local[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = (z > 0) & (np.abs(local[..., 0] / z) <= t) & (np.abs(local[..., 1] / z) <= ty)
    return inside


def project_pano_to_view(pano: PanoImage, cam: PerspectiveCamera) -> ImageBuffer:
    """Perspective image sampled per-pixel from the panorama via ray lookup."""
    rays = cam.rays()
    u, v = ray_to_pixel(rays, pano.width, pano.height)
    vals = sample_pano(pano, u, v)
    return ImageBuffer(np.clip(vals, 0.0, None).astype(np.float32))


# ---------------------------------------------------------------------------
# misc raster ops
# ---------------------------------------------------------------------------


def resize_bilinear(img: ImageBuffer, height: int, width: int, wrap_x: bool = False) -> ImageBuffer:
    """Deterministic bilinear resize; wrap_x treats columns as periodic."""
    src = img.data.astype(np.float64)
    h, w = img.height, img.width
    # map destination pixel centres into source pixel-centre coordinates
    sx = (np.arange(width) + 0.5) * (w / width) - 0.5
    sy = (np.arange(height) + 0.5) * (h / height) - 0.5
    xg, yg = np.meshgrid(sx, sy)
    i0 = np.floor(xg).astype(np.int64)
    j0 = np.floor(yg).astype(np.int64)
    fu = (xg - i0)[..., None]
    fv = (yg - j0)[..., None]
    if wrap_x:
        i1 = np.mod(i0 + 1, w)
        i0 = np.mod(i0, w)
    else:
        i1 = np.clip(i0 + 1, 0, w - 1)
        i0 = np.clip(i0, 0, w - 1)
    j1 = np.clip(j0 + 1, 0, h - 1)
    j0 = np.clip(j0, 0, h - 1)
    top = src[j0, i0] * (1 - fu) + src[j0, i1] * fu
    bot = src[j1, i0] * (1 - fu) + src[j1, i1] * fu
    out = top * (1 - fv) + bot * fv
    if img.channels == 3:
        out = np.clip(out, 0.0, 1.0)
    else:
        out = np.clip(out, 0.0, None)
    return ImageBuffer(out.astype(np.float32))
