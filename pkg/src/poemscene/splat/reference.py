"""Brute-force reference renderer used as the compositing oracle.

Deliberately naive: scalar per-gaussian projection, one global depth sort,
and a plain per-pixel loop over every gaussian — no tiling, no batching.
It shares only the documented constants with the production renderer so
the two paths stay independent implementations of the same contract.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import PerspectiveCamera, quat_to_matrix
from . import sh as shlib
from .render import ALPHA_MAX, ALPHA_MIN, COV2D_FLOOR, SIGMA_CUTOFF, _J_CLIP
from .scene import SplatScene

__all__ = ["render_reference"]


def _project_one(x, s_log, q, sh, opacity, cam: PerspectiveCamera, sh_degree: int):
    wc = cam.rotation.T
    fx = (cam.width / 2.0) / math.tan(cam.fov_x / 2.0)
    fy = fx
    cx, cy = cam.width / 2.0, cam.height / 2.0

    t = wc @ (x - cam.position)
    if t[2] <= cam.near:
        return None

    qn = q / np.linalg.norm(q)
    r = quat_to_matrix(qn)
    m = r @ np.diag(np.exp(s_log))
    sigma3 = m @ m.T

    tan_x = math.tan(cam.fov_x / 2.0)
    tan_y = tan_x * cam.height / cam.width
    z = t[2]
    rx = min(max(t[0] / z, -_J_CLIP * tan_x), _J_CLIP * tan_x)
    ry = min(max(t[1] / z, -_J_CLIP * tan_y), _J_CLIP * tan_y)
    txc, tyc = rx * z, ry * z
    j = np.array(
        [
            [fx / z, 0.0, -fx * txc / (z * z)],
            [0.0, -fy / z, fy * tyc / (z * z)],
        ]
    )
    t2 = j @ wc
    cov = t2 @ sigma3 @ t2.T
    cov[0, 0] += COV2D_FLOOR
    cov[1, 1] += COV2D_FLOOR
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    conic = np.array([cov[1, 1] / det, -cov[0, 1] / det, cov[0, 0] / det])

    mean = np.array([cx + fx * t[0] / z, cy - fy * t[1] / z])
    lam = 0.5 * (cov[0, 0] + cov[1, 1]) + math.sqrt(
        max(0.25 * (cov[0, 0] - cov[1, 1]) ** 2 + cov[0, 1] ** 2, 0.0)
    )
    radius = 3.0 * math.sqrt(max(lam, 0.0))
    if (
        mean[0] + radius <= 0.0
        or mean[0] - radius >= cam.width
        or mean[1] + radius <= 0.0
        or mean[1] - radius >= cam.height
    ):
        return None

    diff = x - cam.position
    vd = diff / np.linalg.norm(diff)
    basis = shlib.sh_basis(sh_degree, vd)
    color = np.clip(basis @ sh + 0.5, 0.0, 1.0)
    return mean, conic, float(z), color, float(opacity)


def render_reference(scene: SplatScene, cam: PerspectiveCamera):
    """Per-pixel Eq-style compositing over globally depth-sorted gaussians."""
    entries = []
    for i in range(scene.count):
        opacity = 1.0 / (1.0 + math.exp(-scene.alpha_logit[i]))
        proj = _project_one(
            scene.positions[i],
            scene.s_log[i],
            scene.q[i],
            scene.sh[i],
            opacity,
            cam,
            scene.sh_degree,
        )
        if proj is not None:
            entries.append(proj + (i,))
    entries.sort(key=lambda e: (e[2], e[5]))  # depth, then original index

    h, w = cam.height, cam.width
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    dep = np.zeros((h, w), dtype=np.float64)
    alp = np.zeros((h, w), dtype=np.float64)
    bg = scene.background

    for py in range(h):
        for px in range(w):
            cxp = px + 0.5
            cyp = py + 0.5
            transmittance = 1.0
            acc = np.zeros(3)
            dacc = 0.0
            for mean, conic, z, color, opacity, _ in entries:
                dx = cxp - mean[0]
                dy = cyp - mean[1]
                sigma = conic[0] * dx * dx + 2.0 * conic[1] * dx * dy + conic[2] * dy * dy
                if sigma > SIGMA_CUTOFF:
                    continue
                a = opacity * math.exp(-0.5 * sigma)
                if a > ALPHA_MAX:
                    a = ALPHA_MAX
                if a < ALPHA_MIN:
                    continue
                acc += color * (a * transmittance)
                dacc += z * a * transmittance
                transmittance *= 1.0 - a
            rgb[py, px] = acc + bg * transmittance
            dep[py, px] = dacc
            alp[py, px] = 1.0 - transmittance
    return rgb, dep, alp
