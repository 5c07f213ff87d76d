"""Request types shared by mock and HTTP backend clients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import FRONT_FACE_INDEX, GeometryError, ImageBuffer, PanoImage, pixel_to_ray
from ..geometry import _direction_to_face_uv

__all__ = ["OutpaintRequest", "VqaQuery", "front_face_mask", "OUTPAINT_WIDTH", "OUTPAINT_HEIGHT"]

OUTPAINT_WIDTH = 1024
OUTPAINT_HEIGHT = 512
FACE_INPUT_SIZE = 512


def front_face_mask(height: int = OUTPAINT_HEIGHT, width: int = OUTPAINT_WIDTH) -> np.ndarray:
    """1 where the panorama must be synthesized, 0 on the preserved front face."""
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    d = pixel_to_ray(width, height, uu, vv)
    face, _, _ = _direction_to_face_uv(d)
    return (face != FRONT_FACE_INDEX).astype(np.float32)


@dataclass(frozen=True)
class OutpaintRequest:
    """Cube-face-conditioned panorama synthesis request."""

    central_face: ImageBuffer  # square; client resizes to 512x512 on dispatch
    mask: np.ndarray  # (H, W) binary, zero exactly on the preserved region
    prompt: str
    seed: int
    width: int = OUTPAINT_WIDTH
    height: int = OUTPAINT_HEIGHT

    def __post_init__(self):
        if self.central_face.width != self.central_face.height:
            raise GeometryError("central face must be square")
        mask = np.asarray(self.mask, dtype=np.float32)
        if mask.shape != (self.height, self.width):
            raise GeometryError("mask must match the output panorama dimensions")
        expected_zero = front_face_mask(self.height, self.width) == 0
        if np.any(mask[expected_zero] != 0):
            raise GeometryError("mask must be zero exactly on the preserved central region")
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class VqaQuery:
    image: ImageBuffer
    statement: str

    def __post_init__(self):
        if not self.statement.strip():
            raise ValueError("statement must be non-empty")

    @property
    def question(self) -> str:
        return f"Does this image show '{self.statement}'? Please answer 'yes' or 'no'."
