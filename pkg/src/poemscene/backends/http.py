"""JSON-over-HTTP clients for the documented backend wire contract.

Routes (POST, JSON bodies): /v1/llm, /v1/t2i, /v1/t2i/tokenize,
/v1/outpaint, /v1/depth, /v1/enhance, /v1/vqa, /v1/qalign.  Auth is a
bearer token read from the env var named in the endpoint config.  Images
ride base64 PNG; depth rides base64 16-bit PNG with a `scale` field.
Transport failures (connection, timeout, 5xx) retry with exponential
backoff; 4xx responses surface as refusal or protocol errors.
"""

from __future__ import annotations

import requests

from ..geometry import GeometryError, ImageBuffer, PanoImage, resize_bilinear
from .base import (
    BackendEndpoint,
    ProtocolError,
    RefusalError,
    TransportError,
    with_retries,
)
from .types import FACE_INPUT_SIZE, OutpaintRequest, VqaQuery
from .wire import b64_to_depth, b64_to_image, depth_to_b64, estimate_tokens, image_to_b64

__all__ = [
    "HttpLlm",
    "HttpTextToImage",
    "HttpOutpaint",
    "HttpDepth",
    "HttpEnhance",
    "HttpVqa",
    "HttpQalign",
]


class _HttpClient:
    def __init__(self, endpoint: BackendEndpoint):
        self.endpoint = endpoint

    def _post(self, route: str, payload: dict) -> dict:
        url = self.endpoint.base_url.rstrip("/") + route
        headers = {}
        token = self.endpoint.token()
        if token:
            headers["Authorization"] = f"Bearer {token}"

        def attempt():
            try:
                resp = requests.post(
                    url, json=payload, headers=headers, timeout=self.endpoint.timeout
                )
            except requests.RequestException as exc:
                raise TransportError(f"POST {route}: {exc}") from exc
            if resp.status_code >= 500:
                raise TransportError(f"POST {route}: server error {resp.status_code}")
            if resp.status_code == 451 or resp.status_code == 403:
                raise RefusalError(f"POST {route}: refused ({resp.status_code})")
            if resp.status_code >= 400:
                raise ProtocolError(f"POST {route}: {resp.status_code} {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"POST {route}: non-JSON response") from exc

        return with_retries(attempt, self.endpoint.retries)


class HttpLlm(_HttpClient):
    def llm_complete(self, messages) -> str:
        if not messages:
            raise ProtocolError("llm_complete requires at least one message")
        doc = self._post("/v1/llm", {"model": self.endpoint.model, "messages": list(messages)})
        if "text" not in doc:
            raise ProtocolError("llm response missing 'text'")
        return doc["text"]


class HttpTextToImage(_HttpClient):
    def text_to_image(self, prompt: str, seed: int, width: int = 1024, height: int = 1024):
        if width != height:
            raise GeometryError("text-to-image output must be square")
        doc = self._post(
            "/v1/t2i",
            {
                "model": self.endpoint.model,
                "prompt": prompt,
                "seed": int(seed),
                "width": width,
                "height": height,
            },
        )
        img = b64_to_image(doc["image_png_b64"])
        if (img.width, img.height) != (width, height):
            raise ProtocolError(
                f"backend returned {img.width}x{img.height}, requested {width}x{height}"
            )
        return img

    def count_tokens(self, text: str) -> int:
        try:
            doc = self._post("/v1/t2i/tokenize", {"text": text})
            return int(doc["count"])
        except TransportError:
            return estimate_tokens(text)  # conservative local fallback


class HttpOutpaint(_HttpClient):
    def outpaint_panorama(self, req: OutpaintRequest) -> PanoImage:
        face = req.central_face
        if face.width != FACE_INPUT_SIZE:
            face = resize_bilinear(face, FACE_INPUT_SIZE, FACE_INPUT_SIZE)
        mask_img = ImageBuffer(req.mask[:, :, None])
        doc = self._post(
            "/v1/outpaint",
            {
                "model": self.endpoint.model,
                "face_png_b64": image_to_b64(face),
                "mask_png_b64": image_to_b64(mask_img),
                "prompt": req.prompt,
                "seed": int(req.seed),
                "width": req.width,
                "height": req.height,
            },
        )
        img = b64_to_image(doc["pano_png_b64"])
        if (img.width, img.height) != (req.width, req.height):
            raise ProtocolError("outpaint backend returned wrong panorama dimensions")
        return PanoImage(img)


class HttpDepth(_HttpClient):
    def estimate_depth(self, pano: PanoImage) -> PanoImage:
        doc = self._post(
            "/v1/depth", {"model": self.endpoint.model, "pano_png_b64": image_to_b64(pano.buffer)}
        )
        depth = b64_to_depth(doc["depth_png16_b64"], float(doc["scale"]))
        if (depth.width, depth.height) != (pano.width, pano.height):
            raise ProtocolError("depth backend changed panorama dimensions")
        return PanoImage(depth)


class HttpEnhance(_HttpClient):
    def enhance_image(self, img: ImageBuffer, scale: int = 2) -> ImageBuffer:
        if scale not in (2, 4):
            raise GeometryError("enhancement scale must be 2 or 4")
        doc = self._post(
            "/v1/enhance",
            {"model": self.endpoint.model, "image_png_b64": image_to_b64(img), "scale": scale},
        )
        out = b64_to_image(doc["image_png_b64"])
        if (out.width, out.height) != (img.width * scale, img.height * scale):
            raise ProtocolError("enhancer returned wrong dimensions")
        return out


class HttpVqa(_HttpClient):
    def vqa_yes_probability(self, image: ImageBuffer, statement: str) -> float:
        q = VqaQuery(image, statement)
        doc = self._post(
            "/v1/vqa",
            {
                "model": self.endpoint.model,
                "image_png_b64": image_to_b64(image),
                "question": q.question,
            },
        )
        p = float(doc.get("yes_probability", -1.0))
        if not 0.0 <= p <= 1.0:
            raise ProtocolError(f"vqa backend returned non-probability {p}")
        return p


class HttpQalign(_HttpClient):
    def qalign_quality(self, image: ImageBuffer) -> float:
        doc = self._post(
            "/v1/qalign", {"model": self.endpoint.model, "image_png_b64": image_to_b64(image)}
        )
        if "score" not in doc:
            raise ProtocolError("qalign backend response missing 'score'")
        return float(doc["score"])  # recorded verbatim, no rescaling
