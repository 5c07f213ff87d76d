#!/usr/bin/env python3
"""Regenerate the shipped IQA assets: pristine set, test set, and models.

Writes into src/poemscene/assets/iqa/:
  pristine/p00.png .. p09.png   384x384 dead-leaves pristine images
  testset/t00.png .. t04.png    288x288 held-out images for blur tests
  niqe_model.json               pristine feature Gaussian
  brisque_model.json            linear regressor over degradation labels

Models are fitted from the 8-bit PNGs (not the float originals) so tests
that reload the files reproduce the shipped numbers exactly.
"""

import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from poemscene.geometry import ImageBuffer  # noqa: E402
from poemscene.imageio import load_color_png, save_color_png  # noqa: E402
from poemscene.iqa.brisque import (  # noqa: E402
    BrisqueModel,
    brisque_features,
    brisque_score,
    save_brisque_model,
)
from poemscene.iqa.niqe import fit_niqe_model, niqe_score, save_niqe_model  # noqa: E402
from poemscene.synth import checkerboard, dead_leaves  # noqa: E402

ASSETS = Path(__file__).resolve().parents[1] / "src" / "poemscene" / "assets" / "iqa"


def to_buffer(gray: np.ndarray) -> ImageBuffer:
    return ImageBuffer(np.stack([gray] * 3, axis=-1).astype(np.float32))


def main() -> None:
    (ASSETS / "pristine").mkdir(parents=True, exist_ok=True)
    (ASSETS / "testset").mkdir(parents=True, exist_ok=True)

    pristine = []
    for i in range(10):
        img = dead_leaves(384, 100 + i)
        path = ASSETS / "pristine" / f"p{i:02d}.png"
        save_color_png(to_buffer(img), path)
        pristine.append(load_color_png(path))
    for i in range(5):
        img = dead_leaves(288, 200 + i)
        save_color_png(to_buffer(img), ASSETS / "testset" / f"t{i:02d}.png")

    model = fit_niqe_model(pristine)
    save_niqe_model(model, ASSETS / "niqe_model.json")

    # sanity: shipped model must order blur severities on the test set
    for i in range(5):
        t = load_color_png(ASSETS / "testset" / f"t{i:02d}.png")
        gray = t.data[:, :, 0].astype(np.float64)
        scores = [
            niqe_score(to_buffer(gaussian_filter(gray, s) if s else gray), model)
            for s in (0, 1, 2, 4)
        ]
        assert all(a <= b for a, b in zip(scores, scores[1:])), (i, scores)

    # BRISQUE: linear regressor on blur/noise degradation severities.
    # Checkerboards join the corpus so hard synthetic edges stay in-range.
    feats, labels = [], []
    rng = np.random.default_rng(7)
    bases = [dead_leaves(384, 100 + i) for i in range(10)]
    bases += [checkerboard(256, cell) for cell in (4, 8, 16, 32)]
    for base in bases:
        variants = [
            (base, 0.0),
            (gaussian_filter(base, 1.0), 30.0),
            (gaussian_filter(base, 2.0), 60.0),
            (gaussian_filter(base, 4.0), 90.0),
            (np.clip(base + rng.normal(0, 0.08, base.shape), 0, 1), 45.0),
            (np.clip(gaussian_filter(base, 1.5) + rng.normal(0, 0.04, base.shape), 0, 1), 70.0),
        ]
        for img, label in variants:
            feats.append(brisque_features(to_buffer(img)))
            labels.append(label)
    feats = np.asarray(feats)
    labels = np.asarray(labels)
    fmin = feats.min(axis=0)
    fmax = feats.max(axis=0)
    span = fmax - fmin
    fmax = np.where(span < 1e-9, fmin + 1e-9, fmax)
    x = 2.0 * (feats - fmin) / (fmax - fmin) - 1.0
    lam = 1e-3
    w = np.linalg.solve(x.T @ x + lam * np.eye(x.shape[1]), x.T @ (labels - labels.mean()))
    model_b = BrisqueModel(
        kind="linear", feature_min=fmin, feature_max=fmax, weights=w, bias=float(labels.mean())
    )
    save_brisque_model(model_b, ASSETS / "brisque_model.json")

    board = checkerboard(256)
    sharp = brisque_score(to_buffer(board), model_b)
    blurred = brisque_score(to_buffer(gaussian_filter(board, 4.0)), model_b)
    assert blurred > sharp, (sharp, blurred)
    print(f"niqe model ok; brisque checkerboard sharp={sharp:.2f} blurred={blurred:.2f}")


if __name__ == "__main__":
    main()
