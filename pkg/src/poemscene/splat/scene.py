"""3D Gaussian scene container and persistence.

A scene stores its gaussians struct-of-arrays so the renderer and
optimizer can vectorize; `Gaussian3D` is the per-item view used when
building tiny scenes by hand.  Opacity lives in logit space and scales in
log space so optimization is unconstrained; quaternions are normalized at
the point of use, never in storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np

from ..geometry import GeometryError
from ..pointcloud import PointCloud
from . import sh as shlib

__all__ = ["Gaussian3D", "SplatScene", "init_from_pointcloud", "save_scene", "load_scene"]

DEFAULT_OPACITY_LOGIT = float(np.log(0.1 / 0.9))  # logit(0.1)


@dataclass
class Gaussian3D:
    """One anisotropic gaussian: position, opacity logit, SH color, log-scale, quaternion."""

    x: np.ndarray  # (3,)
    alpha_logit: float
    sh: np.ndarray  # (K, 3) band-major
    s_log: np.ndarray  # (3,)
    q: np.ndarray  # (4,) (w, x, y, z)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).reshape(3)
        self.sh = np.asarray(self.sh, dtype=np.float64).reshape(-1, 3)
        self.s_log = np.asarray(self.s_log, dtype=np.float64).reshape(3)
        self.q = np.asarray(self.q, dtype=np.float64).reshape(4)
        if np.linalg.norm(self.q) < 1e-12:
            raise GeometryError("zero quaternion")

    @property
    def opacity(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.alpha_logit)))


class SplatScene:
    """Struct-of-arrays gaussian collection plus shared render settings."""

    def __init__(
        self,
        positions: np.ndarray,
        alpha_logit: np.ndarray,
        sh: np.ndarray,
        s_log: np.ndarray,
        q: np.ndarray,
        sh_degree: int = 2,
        background=(0.0, 0.0, 0.0),
    ):
        k = shlib.num_coeffs(sh_degree)
        self.positions = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        n = self.positions.shape[0]
        self.alpha_logit = np.ascontiguousarray(alpha_logit, dtype=np.float64).reshape(n)
        self.sh = np.ascontiguousarray(sh, dtype=np.float64).reshape(n, k, 3)
        self.s_log = np.ascontiguousarray(s_log, dtype=np.float64).reshape(n, 3)
        self.q = np.ascontiguousarray(q, dtype=np.float64).reshape(n, 4)
        self.sh_degree = int(sh_degree)
        self.background = np.asarray(background, dtype=np.float64).reshape(3)
        if np.any(np.linalg.norm(self.q, axis=1) < 1e-12):
            raise GeometryError("zero quaternion in scene")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_gaussians(cls, gaussians, sh_degree: int = 2, background=(0.0, 0.0, 0.0)):
        if not gaussians:
            raise GeometryError("scene requires at least one gaussian")
        k = shlib.num_coeffs(sh_degree)
        for g in gaussians:
            if g.sh.shape[0] != k:
                raise GeometryError("gaussian SH layout does not match scene sh_degree")
        return cls(
            np.stack([g.x for g in gaussians]),
            np.array([g.alpha_logit for g in gaussians]),
            np.stack([g.sh for g in gaussians]),
            np.stack([g.s_log for g in gaussians]),
            np.stack([g.q for g in gaussians]),
            sh_degree=sh_degree,
            background=background,
        )

    def gaussian(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            self.positions[i].copy(),
            float(self.alpha_logit[i]),
            self.sh[i].copy(),
            self.s_log[i].copy(),
            self.q[i].copy(),
        )

    def copy(self) -> "SplatScene":
        return SplatScene(
            self.positions.copy(),
            self.alpha_logit.copy(),
            self.sh.copy(),
            self.s_log.copy(),
            self.q.copy(),
            sh_degree=self.sh_degree,
            background=self.background.copy(),
        )

    def permuted(self, order: np.ndarray) -> "SplatScene":
        order = np.asarray(order)
        return SplatScene(
            self.positions[order],
            self.alpha_logit[order],
            self.sh[order],
            self.s_log[order],
            self.q[order],
            sh_degree=self.sh_degree,
            background=self.background.copy(),
        )

    def extent(self) -> float:
        """Bounding radius around the centroid; scales optimizer step sizes."""
        c = self.positions.mean(axis=0)
        return float(np.linalg.norm(self.positions - c, axis=1).max()) or 1.0


def init_from_pointcloud(
    cloud: PointCloud,
    sh_degree: int = 2,
    background=(0.0, 0.0, 0.0),
    knn: int = 3,
) -> SplatScene:
    """One gaussian per point: DC color, kNN-derived isotropic scale.

    The initial scale of each gaussian is the mean distance to its `knn`
    nearest neighbours (clamped away from zero), stored in log space;
    opacity starts at 0.1 and rotations at identity.
    """
    if cloud.count < 1:
        raise GeometryError("cannot initialize a scene from an empty cloud")
    n = cloud.count
    k = shlib.num_coeffs(sh_degree)
    sh = np.zeros((n, k, 3), dtype=np.float64)
    sh[:, 0, :] = shlib.rgb_to_dc(cloud.colors.astype(np.float64))
    dists = _mean_knn_distance(cloud.positions, knn)
    s_log = np.log(np.maximum(dists, 1e-7))[:, None].repeat(3, axis=1)
    q = np.zeros((n, 4), dtype=np.float64)
    q[:, 0] = 1.0
    return SplatScene(
        cloud.positions.copy(),
        np.full(n, DEFAULT_OPACITY_LOGIT),
        sh,
        s_log,
        q,
        sh_degree=sh_degree,
        background=background,
    )


def _mean_knn_distance(points: np.ndarray, knn: int) -> np.ndarray:
    n = points.shape[0]
    if n == 1:
        return np.full(1, 0.1)
    k = min(knn, n - 1)
    from scipy.spatial import cKDTree

    tree = cKDTree(points)
    d, _ = tree.query(points, k=k + 1)  # first hit is the point itself
    return d[:, 1:].mean(axis=1)


# ---------------------------------------------------------------------------
# persistence: binary PLY + JSON sidecar (sh_degree, background)
# ---------------------------------------------------------------------------


def _scene_properties(k: int):
    names = ["x", "y", "z", "alpha_logit", "s_log_0", "s_log_1", "s_log_2"]
    names += [f"q_{i}" for i in range(4)]
    for b in range(k):
        for c in ("r", "g", "b"):
            names.append(f"sh_{b}_{c}")
    return names


def save_scene(scene: SplatScene, path) -> None:
    """Binary little-endian PLY; sidecar `<path>.meta.json` holds settings."""
    k = scene.sh.shape[1]
    names = _scene_properties(k)
    cols = [scene.positions, scene.alpha_logit[:, None], scene.s_log, scene.q]
    cols.append(scene.sh.reshape(scene.count, -1))
    rec = np.concatenate(cols, axis=1).astype("<f4")
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {scene.count}"]
    header += [f"property float {n}" for n in names]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())
    meta = {
        "sh_degree": scene.sh_degree,
        "background": [float(v) for v in scene.background],
        "count": scene.count,
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_scene(path) -> SplatScene:
    blob = Path(path).read_bytes()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise GeometryError("missing PLY header terminator")
    lines = blob[:end].decode("ascii").splitlines()
    count = None
    props = []
    for line in lines:
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
        elif line.startswith("property float"):
            props.append(line.split()[-1])
    if count is None:
        raise GeometryError("PLY missing vertex element")
    n_sh = len([p for p in props if p.startswith("sh_")])
    if n_sh % 3 != 0:
        raise GeometryError("malformed SH property set")
    k = n_sh // 3
    degree = int(round(np.sqrt(k))) - 1
    if shlib.num_coeffs(degree) != k:
        raise GeometryError(f"SH coefficient count {k} is not a full band set")
    expected = _scene_properties(k)
    if props != expected:
        raise GeometryError("unexpected scene PLY property layout")
    body = blob[end + len(b"end_header\n") :]
    rec = np.frombuffer(body, dtype="<f4", count=count * len(props)).reshape(count, len(props))
    rec = rec.astype(np.float64)
    meta_path = Path(str(path) + ".meta.json")
    background = (0.0, 0.0, 0.0)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        background = tuple(meta.get("background", background))
        degree = int(meta.get("sh_degree", degree))
    return SplatScene(
        rec[:, 0:3],
        rec[:, 3],
        rec[:, 11:].reshape(count, k, 3),
        rec[:, 4:7],
        rec[:, 7:11],
        sh_degree=degree,
        background=background,
    )
