"""Natural-image quality scoring against a pristine-statistics model.

Per 96x96 patch, 18 features at two scales (the MSCN generalized-Gaussian
shape and pooled scale, plus 4-orientation AGGD fits of the paired
products), averaged over the sharpest fraction of patches.  The score is
the pooled-covariance distance

    sqrt((v1 - v2)^T ((cov1 + cov2) / 2)^{-1} (v1 - v2))

between the pristine model's feature Gaussian and the image's; lower
means more natural.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggd import aggd_fit, ggd_fit, paired_products
from .mscn import MscnConfig, mscn_field, to_luminance

__all__ = [
    "IqaError",
    "NiqeModel",
    "patch_features",
    "niqe_features",
    "fit_niqe_model",
    "niqe_distance",
    "niqe_score",
    "save_niqe_model",
    "load_niqe_model",
]

FEATURE_DIM = 36
_PER_SCALE = 18


class IqaError(RuntimeError):
    pass


@dataclass(frozen=True)
class NiqeModel:
    mean: np.ndarray  # (36,)
    cov: np.ndarray  # (36, 36)
    patch_size: int = 96
    sharpness_fraction: float = 0.75

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(FEATURE_DIM)
        cov = np.asarray(self.cov, dtype=np.float64).reshape(FEATURE_DIM, FEATURE_DIM)
        if np.abs(cov - cov.T).max() > 1e-9:
            raise IqaError("model covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _subband_features(field: np.ndarray) -> list:
    alpha, pooled_var = ggd_fit(field)
    feats = [alpha, pooled_var]
    prods = paired_products(field)
    for key in ("h", "v", "d1", "d2"):
        f = aggd_fit(prods[key])
        feats.extend([f.alpha, f.eta, f.sigma_left, f.sigma_right])
    return feats


def _downsample2(img: np.ndarray) -> np.ndarray:
    """Deterministic 2x2 box average (trailing odd row/col dropped)."""
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    v = img[: h2 * 2, : w2 * 2]
    return 0.25 * (v[::2, ::2] + v[1::2, ::2] + v[::2, 1::2] + v[1::2, 1::2])


def patch_features(image, patch_size: int = 96, cfg: MscnConfig = MscnConfig()):
    """Per-patch 36-vectors and sharpness for the non-overlapping grid.

    Returns (features (n, 36), sharpness (n,)); sharpness is the mean
    local deviation over the patch at full scale.
    """
    lum = to_luminance(image)
    h, w = lum.shape
    if h < patch_size or w < patch_size:
        raise IqaError(f"image {w}x{h} smaller than patch size {patch_size}")
    m1, dev = mscn_field(lum, cfg)
    m2, _ = mscn_field(_downsample2(lum), cfg)
    half = patch_size // 2

    feats = []
    sharps = []
    for by in range(h // patch_size):
        for bx in range(w // patch_size):
            y0, x0 = by * patch_size, bx * patch_size
            p1 = m1[y0 : y0 + patch_size, x0 : x0 + patch_size]
            p2 = m2[by * half : (by + 1) * half, bx * half : (bx + 1) * half]
            feats.append(_subband_features(p1) + _subband_features(p2))
            sharps.append(dev[y0 : y0 + patch_size, x0 : x0 + patch_size].mean())
    return np.asarray(feats, dtype=np.float64), np.asarray(sharps, dtype=np.float64)


def _select_sharpest(feats: np.ndarray, sharps: np.ndarray, fraction: float) -> np.ndarray:
    n = len(feats)
    keep = max(1, math.ceil(fraction * n))
    order = np.argsort(-sharps, kind="stable")
    return feats[np.sort(order[:keep])]


def niqe_features(
    image, patch_size: int = 96, sharpness_fraction: float = 0.75
) -> np.ndarray:
    """Length-36 feature vector: mean over the sharpest patches."""
    feats, sharps = patch_features(image, patch_size)
    return _select_sharpest(feats, sharps, sharpness_fraction).mean(axis=0)


def fit_niqe_model(
    images, patch_size: int = 96, sharpness_fraction: float = 0.75
) -> NiqeModel:
    """Closed-form pristine model: mean/covariance of pooled patch features."""
    pools = []
    for img in images:
        feats, sharps = patch_features(img, patch_size)
        pools.append(_select_sharpest(feats, sharps, sharpness_fraction))
    stack = np.concatenate(pools, axis=0)
    if stack.shape[0] <= FEATURE_DIM:
        raise IqaError(
            f"need more than {FEATURE_DIM} selected patches, got {stack.shape[0]}"
        )
    mean = stack.mean(axis=0)
    cov = np.cov(stack, rowvar=False)
    if np.linalg.matrix_rank(cov) < FEATURE_DIM:
        raise IqaError("pristine feature covariance is singular")
    cov = cov + 1e-6 * np.eye(FEATURE_DIM)
    return NiqeModel(mean, cov, patch_size, sharpness_fraction)


def niqe_distance(mean1, cov1, mean2, cov2) -> float:
    """Symmetric pooled-covariance distance between two feature Gaussians."""
    v1 = np.asarray(mean1, dtype=np.float64)
    v2 = np.asarray(mean2, dtype=np.float64)
    pooled = (np.asarray(cov1, dtype=np.float64) + np.asarray(cov2, dtype=np.float64)) / 2.0
    diff = v1 - v2
    try:
        sol = np.linalg.solve(pooled, diff)
    except np.linalg.LinAlgError as exc:
        raise IqaError("singular pooled covariance") from exc
    val = float(diff @ sol)
    if not np.isfinite(val):
        raise IqaError("non-finite pooled distance")
    return math.sqrt(max(val, 0.0))


def niqe_score(image, model: NiqeModel) -> float:
    """NIQE-style naturalness score; lower is more natural."""
    feats, sharps = patch_features(image, model.patch_size)
    sel = _select_sharpest(feats, sharps, model.sharpness_fraction)
    v2 = sel.mean(axis=0)
    cov2 = (
        np.cov(sel, rowvar=False)
        if sel.shape[0] > 1
        else np.zeros((FEATURE_DIM, FEATURE_DIM))
    )
    return niqe_distance(model.mean, model.cov, v2, cov2)


def save_niqe_model(model: NiqeModel, path) -> None:
    doc = {
        "kind": "niqe",
        "patch_size": model.patch_size,
        "sharpness_fraction": model.sharpness_fraction,
        "mean": model.mean.tolist(),
        "cov": model.cov.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_niqe_model(path) -> NiqeModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IqaError(f"cannot load NIQE model from {path}: {exc}") from exc
    if doc.get("kind") != "niqe":
        raise IqaError(f"{path} is not a NIQE model file")
    return NiqeModel(
        np.asarray(doc["mean"]),
        np.asarray(doc["cov"]),
        int(doc.get("patch_size", 96)),
        float(doc.get("sharpness_fraction", 0.75)),
    )
