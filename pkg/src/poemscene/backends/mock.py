"""Seeded offline stand-ins for every external model.

Each mock is a pure function of (request, seed): identical inputs give
byte-identical outputs on any machine, which keeps the full pipeline and
its tests runnable with no network.  The LLM mock replays canned
transcripts keyed by a request hash and otherwise synthesizes a
schema-conforming response from the request itself (strict mode disables
the fallback).
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from ..geometry import (
    FRONT_FACE_INDEX,
    GeometryError,
    ImageBuffer,
    PanoImage,
    pixel_to_ray,
    _direction_to_face_uv,
    _sample_face,
)
from ..synth import noise_rgb, value_noise
from .base import ProtocolError
from .types import FACE_INPUT_SIZE, OutpaintRequest, VqaQuery
from .wire import estimate_tokens, request_hash

__all__ = [
    "MockLlm",
    "MockTextToImage",
    "MockOutpaint",
    "MockDepth",
    "MockEnhance",
    "MockVqa",
    "MockQalign",
    "mock_suite",
]


def _seed_from(*parts) -> int:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


class _CallCounter:
    def __init__(self):
        self.calls = 0


class MockLlm(_CallCounter):
    """Scripted transcript replay with a deterministic schema-aware fallback."""

    def __init__(self, transcripts=None, strict: bool = False, seed: int = 0):
        super().__init__()
        if isinstance(transcripts, (str, Path)):
            transcripts = json.loads(Path(transcripts).read_text())
        self.transcripts = dict(transcripts or {})
        self.strict = strict
        self.seed = seed
        self._fail_next = 0  # fault injection for retry tests

    def llm_complete(self, messages) -> str:
        self.calls += 1
        if self._fail_next > 0:
            self._fail_next -= 1
            from .base import TransportError

            raise TransportError("injected transient failure")
        key = request_hash({"messages": list(messages)})
        if key in self.transcripts:
            return self.transcripts[key]
        if self.strict:
            raise ProtocolError(f"no scripted transcript for request {key[:12]}")
        return self._fallback(messages, key)

    def _fallback(self, messages, key: str) -> str:
        prompt = messages[-1]["content"] if messages else ""
        m = re.search(r"containing keys: ([\w, ]+)", prompt)
        keys = [k.strip() for k in m.group(1).split(",")] if m else ["text"]
        src = re.search(r"<<<(.*?)>>>", prompt, re.S)
        source = src.group(1).strip() if src else ""
        frags = [f.strip() for f in re.split(r"[,\n/;]+", source) if f.strip()]
        doc = {}
        for k in keys:
            if k == "elements":
                phrases = frags[:3] or [f"motif {key[i*2:i*2+4]}" for i in range(3)]
                doc[k] = [
                    {"phrase": p, "symbolic_note": f"evokes {p.split()[-1]}"} for p in phrases
                ]
            elif k == "emotional_themes":
                doc[k] = ["stillness", "transience"]
            elif k == "token_hint":
                doc[k] = 0
            else:
                words = " ".join(frags[:2]) if frags else key[:10]
                doc[k] = f"A rendering of {words} (variant {key[:6]})."
        return "```json\n" + json.dumps(doc, ensure_ascii=False, indent=1) + "\n```"

    def inject_transient_failures(self, n: int) -> None:
        self._fail_next = n


class MockTextToImage(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def text_to_image(self, prompt: str, seed: int, width: int = 1024, height: int = 1024):
        self.calls += 1
        if width != height:
            raise GeometryError("text-to-image output must be square")
        return noise_rgb(height, width, _seed_from("t2i", self.seed, seed, prompt) % 2**31)

    def count_tokens(self, text: str) -> int:
        return estimate_tokens(text)


class MockOutpaint(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def outpaint_panorama(self, req: OutpaintRequest) -> PanoImage:
        self.calls += 1
        face = req.central_face
        if face.width != FACE_INPUT_SIZE:
            from ..geometry import resize_bilinear

            face = resize_bilinear(face, FACE_INPUT_SIZE, FACE_INPUT_SIZE)
        h, w = req.height, req.width
        base = np.stack(
            [
                value_noise(h, w, _seed_from("outpaint", self.seed, req.seed, req.prompt, c) % 2**31)
                for c in range(3)
            ],
            axis=-1,
        )
        # the preserved region replays the conditioning face exactly
        uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        d = pixel_to_ray(w, h, uu, vv)
        face_idx, a, b = _direction_to_face_uv(d)
        m = face_idx == FRONT_FACE_INDEX
        s = face.width
        fx = (a[m] + 1.0) * s / 2.0 - 0.5
        fy = (1.0 - b[m]) * s / 2.0 - 0.5
        base[m] = _sample_face(face.data.astype(np.float64), fx, fy)
        return PanoImage(ImageBuffer(np.clip(base, 0.0, 1.0).astype(np.float32)))


class MockDepth(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def estimate_depth(self, pano: PanoImage) -> PanoImage:
        self.calls += 1
        digest = hashlib.sha256(pano.data.tobytes()).hexdigest()[:12]
        h, w = pano.height, pano.width
        noise = value_noise(h, w, _seed_from("depth", self.seed, digest) % 2**31)
        # brighter content reads as closer; smooth everything for stability
        lum = pano.data.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        rel = 0.25 + 0.55 * gaussian_filter(noise, 3.0) + 0.2 * (1.0 - gaussian_filter(lum, 5.0))
        rel = np.clip(rel, 0.0, None)
        return PanoImage(ImageBuffer(rel.astype(np.float32)[:, :, None]))


class MockEnhance(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def enhance_image(self, img: ImageBuffer, scale: int = 2) -> ImageBuffer:
        self.calls += 1
        if scale not in (2, 4):
            raise GeometryError("enhancement scale must be 2 or 4")
        data = img.data.astype(np.float64)
        up = zoom(data, (scale, scale, 1), order=3, prefilter=True, grid_mode=True, mode="nearest")
        soft = gaussian_filter(up, (1.0, 1.0, 0.0))
        sharp = np.clip(up + 0.5 * (up - soft), 0.0, 1.0)
        return ImageBuffer(sharp.astype(np.float32))


class MockVqa(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def vqa_yes_probability(self, image: ImageBuffer, statement: str) -> float:
        self.calls += 1
        q = VqaQuery(image, statement)
        digest = hashlib.sha256(image.data.tobytes()).hexdigest()[:12]
        v = _seed_from("vqa", self.seed, digest, q.question) % 10**9
        return v / (10**9 - 1)


class MockQalign(_CallCounter):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def qalign_quality(self, image: ImageBuffer) -> float:
        self.calls += 1
        digest = hashlib.sha256(image.data.tobytes()).hexdigest()[:12]
        v = _seed_from("qalign", self.seed, digest) % 10**9
        return 1.0 + 4.0 * v / (10**9 - 1)


def mock_suite(seed: int = 0, transcripts=None, strict_llm: bool = False) -> dict:
    """One instance of every mock backend, keyed by role."""
    return {
        "llm": MockLlm(transcripts, strict=strict_llm, seed=seed),
        "t2i": MockTextToImage(seed),
        "outpaint": MockOutpaint(seed),
        "depth": MockDepth(seed),
        "enhance": MockEnhance(seed),
        "vqa": MockVqa(seed),
        "qalign": MockQalign(seed),
    }
