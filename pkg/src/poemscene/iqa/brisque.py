"""BRISQUE-style scoring: whole-image MSCN features through a loaded regressor.

Feature layout per scale (full resolution, then 2x box-downsampled):
GGD shape and pooled variance of the MSCN field, then (alpha, eta,
sigma_left, sigma_right) for the 4 paired-product orientations — 18 per
scale, 36 total.  Features are min-max scaled to [-1, 1] with ranges
stored in the model file; the regressor is either linear or RBF-SVR
shaped, both loaded from JSON (training happens offline).  Lower scores
mean better quality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .aggd import aggd_fit, ggd_fit, paired_products
from .mscn import MscnConfig, mscn, to_luminance
from .niqe import FEATURE_DIM, IqaError, _downsample2, _subband_features

__all__ = [
    "BrisqueModel",
    "brisque_features",
    "scale_features",
    "brisque_score",
    "save_brisque_model",
    "load_brisque_model",
]


@dataclass(frozen=True)
class BrisqueModel:
    kind: str  # "linear" or "rbf"
    feature_min: np.ndarray  # (36,)
    feature_max: np.ndarray  # (36,)
    weights: Optional[np.ndarray] = None  # linear: (36,)
    bias: float = 0.0
    support_vectors: Optional[np.ndarray] = None  # rbf: (m, 36), scaled space
    dual_coefs: Optional[np.ndarray] = None  # rbf: (m,)
    gamma: float = 0.05

    def __post_init__(self):
        fmin = np.asarray(self.feature_min, dtype=np.float64).reshape(FEATURE_DIM)
        fmax = np.asarray(self.feature_max, dtype=np.float64).reshape(FEATURE_DIM)
        if np.any(fmax <= fmin):
            raise IqaError("feature scaling ranges require min < max per feature")
        object.__setattr__(self, "feature_min", fmin)
        object.__setattr__(self, "feature_max", fmax)
        if self.kind == "linear":
            if self.weights is None:
                raise IqaError("linear model requires weights")
            object.__setattr__(
                self, "weights", np.asarray(self.weights, dtype=np.float64).reshape(FEATURE_DIM)
            )
        elif self.kind == "rbf":
            if self.support_vectors is None or self.dual_coefs is None:
                raise IqaError("rbf model requires support vectors and dual coefficients")
            sv = np.asarray(self.support_vectors, dtype=np.float64).reshape(-1, FEATURE_DIM)
            dc = np.asarray(self.dual_coefs, dtype=np.float64).reshape(sv.shape[0])
            object.__setattr__(self, "support_vectors", sv)
            object.__setattr__(self, "dual_coefs", dc)
        else:
            raise IqaError(f"unknown regressor kind {self.kind!r}")


def brisque_features(image, cfg: MscnConfig = MscnConfig()) -> np.ndarray:
    """Whole-image 36-vector (no patching, two scales)."""
    lum = to_luminance(image)
    f1 = _subband_features(mscn(lum, cfg))
    f2 = _subband_features(mscn(_downsample2(lum), cfg))
    return np.asarray(f1 + f2, dtype=np.float64)


def scale_features(features: np.ndarray, model: BrisqueModel) -> np.ndarray:
    """Min-max scale so model min maps to -1 and model max to +1 exactly."""
    f = np.asarray(features, dtype=np.float64)
    return 2.0 * (f - model.feature_min) / (model.feature_max - model.feature_min) - 1.0


def brisque_score(image, model: BrisqueModel) -> float:
    x = scale_features(brisque_features(image), model)
    if model.kind == "linear":
        return float(x @ model.weights + model.bias)
    d2 = ((model.support_vectors - x[None, :]) ** 2).sum(axis=1)
    return float(model.dual_coefs @ np.exp(-model.gamma * d2) + model.bias)


def save_brisque_model(model: BrisqueModel, path) -> None:
    doc = {
        "kind": f"brisque-{model.kind}",
        "feature_min": model.feature_min.tolist(),
        "feature_max": model.feature_max.tolist(),
        "bias": model.bias,
    }
    if model.kind == "linear":
        doc["weights"] = model.weights.tolist()
    else:
        doc["support_vectors"] = model.support_vectors.tolist()
        doc["dual_coefs"] = model.dual_coefs.tolist()
        doc["gamma"] = model.gamma
    Path(path).write_text(json.dumps(doc) + "\n")


def load_brisque_model(path) -> BrisqueModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IqaError(f"cannot load BRISQUE model from {path}: {exc}") from exc
    kind = doc.get("kind", "")
    if not kind.startswith("brisque-"):
        raise IqaError(f"{path} is not a BRISQUE model file")
    kind = kind.split("-", 1)[1]
    return BrisqueModel(
        kind=kind,
        feature_min=np.asarray(doc["feature_min"]),
        feature_max=np.asarray(doc["feature_max"]),
        weights=np.asarray(doc["weights"]) if "weights" in doc else None,
        bias=float(doc.get("bias", 0.0)),
        support_vectors=np.asarray(doc["support_vectors"])
        if "support_vectors" in doc
        else None,
        dual_coefs=np.asarray(doc["dual_coefs"]) if "dual_coefs" in doc else None,
        gamma=float(doc.get("gamma", 0.05)),
    )
