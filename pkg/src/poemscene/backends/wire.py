"""Wire-format helpers for the JSON-over-HTTP backend contract.

Color images travel as base64 8-bit PNG; depth as base64 16-bit PNG plus
a float `scale` field (world units at pixel value 65535).
"""

from __future__ import annotations

import base64
import hashlib
import json
import re

from ..geometry import ImageBuffer
from ..imageio import (
    decode_depth_png_bytes,
    decode_png_bytes,
    encode_depth_png_bytes,
    encode_png_bytes,
)

__all__ = [
    "image_to_b64",
    "b64_to_image",
    "depth_to_b64",
    "b64_to_depth",
    "request_hash",
    "estimate_tokens",
]


def image_to_b64(img: ImageBuffer) -> str:
    return base64.b64encode(encode_png_bytes(img)).decode("ascii")


def b64_to_image(blob: str) -> ImageBuffer:
    return decode_png_bytes(base64.b64decode(blob))


def depth_to_b64(img: ImageBuffer) -> tuple:
    raw, scale = encode_depth_png_bytes(img)
    return base64.b64encode(raw).decode("ascii"), scale


def b64_to_depth(blob: str, scale: float) -> ImageBuffer:
    return decode_depth_png_bytes(base64.b64decode(blob), scale)


def request_hash(payload) -> str:
    """Stable digest of a JSON-serializable request (keys sorted)."""
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")


def estimate_tokens(text: str) -> int:
    """Conservative local token estimate: words plus punctuation marks."""
    return len(_TOKEN_RE.findall(text))
