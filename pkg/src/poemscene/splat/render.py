"""Forward splat rendering: EWA projection and tiled alpha compositing.

Pixels composite front to back: C = sum_i c_i * a_i * T_i with
T_i = prod_{j<i} (1 - a_j), plus background * T_final.  Gaussians are
depth-sorted globally (stable, ties keep original index order), binned
into 16x16 pixel tiles by their 3-sigma screen bounds, and each tile is
composited as one dense (gaussians x pixels) matrix pass, so results are
independent of tile scheduling and of the input gaussian order.

All internal arithmetic is float64; `render` quantizes to float32 image
buffers at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import GeometryError, ImageBuffer, PerspectiveCamera, quat_to_matrix
from . import sh as shlib
from .scene import SplatScene

__all__ = [
    "TILE_SIZE",
    "COV2D_FLOOR",
    "ALPHA_MAX",
    "ALPHA_MIN",
    "SIGMA_CUTOFF",
    "ProjectedGaussian",
    "covariance3d",
    "project",
    "sh_to_color",
    "composite_pixel",
    "render",
    "render_arrays",
    "CompositeOrderError",
]

TILE_SIZE = 16
COV2D_FLOOR = 0.3  # px^2 added to the 2D covariance diagonal
ALPHA_MAX = 0.999  # keeps transmittance strictly positive
ALPHA_MIN = 1.0 / 255.0  # contributions below this are dropped
SIGMA_CUTOFF = 9.0  # Mahalanobis d^T cov^-1 d beyond 3 sigma is dropped
_J_CLIP = 1.3  # frustum-ratio clamp for the projection Jacobian


class CompositeOrderError(RuntimeError):
    """Raised when composite_pixel receives entries out of depth order."""


@dataclass
class ProjectedGaussian:
    mean2d: np.ndarray  # (2,)
    cov2d: np.ndarray  # (2, 2)
    view_depth: float
    color: np.ndarray  # (3,)
    opacity: float


def _rotations(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for (N, 4) quaternions, normalized first."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = (q / n).T
    r = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    r[..., 0, 0] = 1 - 2 * (y * y + z * z)
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = 1 - 2 * (x * x + z * z)
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def covariance3d_batch(s_log: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sigma = R diag(exp(2 s_log)) R^T for (N,) inputs -> (N, 3, 3)."""
    r = _rotations(q)
    s = np.exp(np.asarray(s_log, dtype=np.float64))
    m = r * s[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


def covariance3d(g) -> np.ndarray:
    """3x3 world covariance of a single gaussian."""
    return covariance3d_batch(g.s_log[None], g.q[None])[0]


def sh_to_color(sh: np.ndarray, view_dir: np.ndarray, sh_degree: int) -> np.ndarray:
    """View-dependent RGB: clamp(SH(view_dir) . coeffs + 0.5, 0, 1)."""
    d = np.asarray(view_dir, dtype=np.float64)
    n = np.linalg.norm(d, axis=-1)
    if np.any(np.abs(n - 1.0) > 1e-6):
        raise GeometryError("view direction must be unit length")
    color, _ = shlib.eval_sh_color(sh, d, sh_degree)
    return color


class _Projection:
    """Vectorized projection of a whole scene into one camera."""

    __slots__ = (
        "keep",
        "order",
        "mean2d",
        "conic",
        "cov2d",
        "depth",
        "color",
        "raw_color",
        "opacity",
        "radius",
        "t_cam",
        "t_clip",
        "clip_mask",
        "view_dir",
        "view_norm",
        "sigma3",
        "rot3",
        "scale",
        "q_norm",
        "cam",
    )


def _project_scene(scene: SplatScene, cam: PerspectiveCamera) -> _Projection:
    n = scene.count
    wc = cam.rotation.T  # world -> camera
    fx = cam.focal
    fy = fx
    cx = cam.width / 2.0
    cy = cam.height / 2.0

    t = (scene.positions - cam.position[None, :]) @ wc.T  # (N, 3) camera coords
    z = t[:, 2]
    in_front = z > cam.near

    sigma3 = covariance3d_batch(scene.s_log, scene.q)

    tan_x = np.tan(cam.fov_x / 2.0)
    tan_y = tan_x * cam.height / cam.width
    lim_x = _J_CLIP * tan_x
    lim_y = _J_CLIP * tan_y
    zs = np.where(in_front, z, 1.0)  # avoid divide-by-zero on culled rows
    rx = np.clip(t[:, 0] / zs, -lim_x, lim_x)
    ry = np.clip(t[:, 1] / zs, -lim_y, lim_y)
    clip_mask = np.stack(
        [np.abs(t[:, 0] / zs) > lim_x, np.abs(t[:, 1] / zs) > lim_y], axis=1
    )
    txc = rx * zs
    tyc = ry * zs

    j = np.zeros((n, 2, 3), dtype=np.float64)
    j[:, 0, 0] = fx / zs
    j[:, 0, 2] = -fx * txc / (zs * zs)
    j[:, 1, 1] = -fy / zs
    j[:, 1, 2] = fy * tyc / (zs * zs)

    t2 = j @ wc[None, :, :]
    cov2d = t2 @ sigma3 @ np.swapaxes(t2, 1, 2)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    det = np.where(det > 1e-300, det, 1e-300)
    conic = np.stack([c / det, -b / det, a / det], axis=1)  # (A, B, C) of inverse

    mean_u = cx + fx * t[:, 0] / zs
    mean_v = cy - fy * t[:, 1] / zs

    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radius = 3.0 * np.sqrt(np.maximum(lam_max, 0.0))

    on_screen = (
        (mean_u + radius > 0.0)
        & (mean_u - radius < cam.width)
        & (mean_v + radius > 0.0)
        & (mean_v - radius < cam.height)
    )
    keep = in_front & on_screen

    diff = scene.positions - cam.position[None, :]
    norm = np.linalg.norm(diff, axis=1)
    norm = np.where(norm > 1e-12, norm, 1.0)
    view_dir = diff / norm[:, None]
    color, raw = shlib.eval_sh_color(scene.sh, view_dir, scene.sh_degree)

    opacity = 1.0 / (1.0 + np.exp(-scene.alpha_logit))

    p = _Projection()
    p.keep = keep
    kept_idx = np.nonzero(keep)[0]
    p.order = kept_idx[np.argsort(z[kept_idx], kind="stable")]
    p.mean2d = np.stack([mean_u, mean_v], axis=1)
    p.conic = conic
    p.cov2d = cov2d
    p.depth = z
    p.color = color
    p.raw_color = raw
    p.opacity = opacity
    p.radius = radius
    p.t_cam = t
    p.t_clip = np.stack([txc, tyc], axis=1)
    p.clip_mask = clip_mask
    p.view_dir = view_dir
    p.view_norm = norm
    p.sigma3 = sigma3
    p.rot3 = _rotations(scene.q)
    p.scale = np.exp(scene.s_log)
    p.q_norm = np.linalg.norm(scene.q, axis=1)
    p.cam = cam
    return p


def project(g, cam: PerspectiveCamera, sh_degree: Optional[int] = None):
    """Project one gaussian; returns ProjectedGaussian or None when culled."""
    if sh_degree is None:
        sh_degree = int(round(np.sqrt(np.asarray(g.sh).shape[0]))) - 1
    scene = SplatScene(
        g.x[None], np.array([g.alpha_logit]), g.sh[None], g.s_log[None], g.q[None],
        sh_degree=sh_degree,
    )
    p = _project_scene(scene, cam)
    if not p.keep[0]:
        return None
    return ProjectedGaussian(
        mean2d=p.mean2d[0].copy(),
        cov2d=p.cov2d[0].copy(),
        view_depth=float(p.depth[0]),
        color=p.color[0].copy(),
        opacity=float(p.opacity[0]),
    )


def composite_pixel(entries, background, depths=None, check_sorted: bool = False):
    """Eq-style front-to-back compositing of one pixel.

    entries: iterable of (color (3,), alpha in [0, 1)); background: (3,).
    Optionally pass per-entry depths with check_sorted=True to assert
    front-to-back ordering.
    """
    bg = np.asarray(background, dtype=np.float64)
    if check_sorted and depths is not None:
        d = np.asarray(depths, dtype=np.float64)
        if np.any(np.diff(d) < 0):
            raise CompositeOrderError("entries are not sorted front to back")
    out = np.zeros(3, dtype=np.float64)
    transmittance = 1.0
    for color, alpha in entries:
        if not 0.0 <= alpha < 1.0:
            raise GeometryError("alpha weights must lie in [0, 1)")
        out += np.asarray(color, dtype=np.float64) * alpha * transmittance
        transmittance *= 1.0 - alpha
    return out + bg * transmittance


def _tile_ranges(p: _Projection, width: int, height: int):
    """Per-gaussian tile bounds for the depth-ordered kept set."""
    order = p.order
    mu = p.mean2d[order]
    r = p.radius[order]
    tx0 = np.clip(np.floor((mu[:, 0] - r) / TILE_SIZE), 0, None).astype(np.int64)
    tx1 = np.clip(np.ceil((mu[:, 0] + r) / TILE_SIZE), None, (width + TILE_SIZE - 1) // TILE_SIZE).astype(np.int64)
    ty0 = np.clip(np.floor((mu[:, 1] - r) / TILE_SIZE), 0, None).astype(np.int64)
    ty1 = np.clip(np.ceil((mu[:, 1] + r) / TILE_SIZE), None, (height + TILE_SIZE - 1) // TILE_SIZE).astype(np.int64)
    return tx0, tx1, ty0, ty1


def _tile_lists(p: _Projection, width: int, height: int):
    """(tile_id, rank) records sorted by tile then depth rank."""
    tiles_x = (width + TILE_SIZE - 1) // TILE_SIZE
    tx0, tx1, ty0, ty1 = _tile_ranges(p, width, height)
    counts = np.maximum(tx1 - tx0, 0) * np.maximum(ty1 - ty0, 0)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), tiles_x
    rank = np.repeat(np.arange(len(counts)), counts)
    tile_ids = np.empty(total, dtype=np.int64)
    pos = 0
    for g in range(len(counts)):
        c = counts[g]
        if c == 0:
            continue
        xs = np.arange(tx0[g], tx1[g])
        ys = np.arange(ty0[g], ty1[g])
        tid = (ys[:, None] * tiles_x + xs[None, :]).ravel()
        tile_ids[pos : pos + c] = tid
        pos += c
    perm = np.lexsort((rank, tile_ids))
    return tile_ids[perm], rank[perm], tiles_x


def _alpha_matrix(p: _Projection, ranks: np.ndarray, px: np.ndarray, py: np.ndarray):
    """Gated alpha values for ordered gaussians x tile pixels."""
    idx = p.order[ranks]
    mu = p.mean2d[idx]
    con = p.conic[idx]
    dx = px[None, :] - mu[:, 0:1]
    dy = py[None, :] - mu[:, 1:2]
    sigma = con[:, 0:1] * dx * dx + 2.0 * con[:, 1:2] * dx * dy + con[:, 2:3] * dy * dy
    alpha = p.opacity[idx][:, None] * np.exp(-0.5 * sigma)
    alpha = np.where(sigma <= SIGMA_CUTOFF, alpha, 0.0)
    alpha = np.minimum(alpha, ALPHA_MAX)
    alpha = np.where(alpha >= ALPHA_MIN, alpha, 0.0)
    return alpha, sigma, dx, dy, idx


def render_arrays(scene: SplatScene, cam: PerspectiveCamera):
    """Float64 (rgb, depth, alpha) arrays plus the projection context."""
    if scene.count < 1:
        raise GeometryError("cannot render an empty scene")
    w, h = cam.width, cam.height
    p = _project_scene(scene, cam)
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    dep = np.zeros((h, w), dtype=np.float64)
    alp = np.zeros((h, w), dtype=np.float64)
    bg = scene.background

    tile_ids, ranks, tiles_x = _tile_lists(p, w, h)
    tiles_y = (h + TILE_SIZE - 1) // TILE_SIZE
    if len(tile_ids) == 0:
        rgb[:] = bg[None, None, :]
        return rgb, dep, alp, p

    starts = np.searchsorted(tile_ids, np.arange(tiles_x * tiles_y), side="left")
    ends = np.searchsorted(tile_ids, np.arange(tiles_x * tiles_y), side="right")

    for ty in range(tiles_y):
        y0 = ty * TILE_SIZE
        y1 = min(y0 + TILE_SIZE, h)
        for tx in range(tiles_x):
            tid = ty * tiles_x + tx
            s, e = starts[tid], ends[tid]
            x0 = tx * TILE_SIZE
            x1 = min(x0 + TILE_SIZE, w)
            if s == e:
                rgb[y0:y1, x0:x1] = bg[None, None, :]
                continue
            px, py = np.meshgrid(
                np.arange(x0, x1, dtype=np.float64) + 0.5,
                np.arange(y0, y1, dtype=np.float64) + 0.5,
            )
            shape = px.shape
            px = px.ravel()
            py = py.ravel()
            alpha, _, _, _, idx = _alpha_matrix(p, ranks[s:e], px, py)
            om = 1.0 - alpha
            trans = np.cumprod(om, axis=0)
            t_excl = np.vstack([np.ones((1, alpha.shape[1])), trans[:-1]])
            weight = alpha * t_excl
            colors = p.color[idx]
            tile_rgb = weight.T @ colors
            t_final = trans[-1]
            tile_rgb += bg[None, :] * t_final[:, None]
            tile_dep = weight.T @ p.depth[idx]
            rgb[y0:y1, x0:x1] = tile_rgb.reshape(shape + (3,))
            dep[y0:y1, x0:x1] = tile_dep.reshape(shape)
            alp[y0:y1, x0:x1] = (1.0 - t_final).reshape(shape)
    return rgb, dep, alp, p


def render(scene: SplatScene, cam: PerspectiveCamera):
    """Composite the scene into (rgb, depth, alpha) float32 image buffers."""
    rgb, dep, alp, _ = render_arrays(scene, cam)
    return (
        ImageBuffer(np.clip(rgb, 0.0, 1.0).astype(np.float32)),
        ImageBuffer(np.maximum(dep, 0.0).astype(np.float32)[:, :, None]),
        ImageBuffer(np.clip(alp, 0.0, 1.0).astype(np.float32)[:, :, None]),
    )
