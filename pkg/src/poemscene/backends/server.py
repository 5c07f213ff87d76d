"""Offline mock model server implementing the backend wire contract.

Serves the seeded mocks over the same /v1/* routes the HTTP clients
speak, so integration tests (and the `mock-server` CLI subcommand) can
exercise the real transport path with no external models.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..geometry import GeometryError, PanoImage
from .mock import mock_suite
from .types import OutpaintRequest, front_face_mask
from .wire import b64_to_image, depth_to_b64, image_to_b64


def create_mock_app(seed: int = 0, transcripts=None) -> FastAPI:
    suite = mock_suite(seed=seed, transcripts=transcripts)
    app = FastAPI(title="poemscene mock backends")

    @app.exception_handler(Exception)
    async def _err(request: Request, exc: Exception):
        code = 400 if isinstance(exc, (GeometryError, ValueError, KeyError)) else 500
        return JSONResponse({"error": str(exc)}, status_code=code)

    @app.post("/v1/llm")
    async def llm(req: Request):
        doc = await req.json()
        return {"text": suite["llm"].llm_complete(doc["messages"])}

    @app.post("/v1/t2i")
    async def t2i(req: Request):
        doc = await req.json()
        img = suite["t2i"].text_to_image(
            doc["prompt"], int(doc.get("seed", 0)), int(doc["width"]), int(doc["height"])
        )
        return {"image_png_b64": image_to_b64(img), "stages": ["base", "upscale-1", "upscale-2"]}

    @app.post("/v1/t2i/tokenize")
    async def tokenize(req: Request):
        doc = await req.json()
        return {"count": suite["t2i"].count_tokens(doc["text"])}

    @app.post("/v1/outpaint")
    async def outpaint(req: Request):
        doc = await req.json()
        face = b64_to_image(doc["face_png_b64"])
        out = suite["outpaint"].outpaint_panorama(
            OutpaintRequest(
                central_face=face,
                mask=front_face_mask(int(doc["height"]), int(doc["width"])),
                prompt=doc.get("prompt", ""),
                seed=int(doc.get("seed", 0)),
                width=int(doc["width"]),
                height=int(doc["height"]),
            )
        )
        return {"pano_png_b64": image_to_b64(out.buffer)}

    @app.post("/v1/depth")
    async def depth(req: Request):
        doc = await req.json()
        pano = PanoImage(b64_to_image(doc["pano_png_b64"]))
        out = suite["depth"].estimate_depth(pano)
        blob, scale = depth_to_b64(out.buffer)
        return {"depth_png16_b64": blob, "scale": scale}

    @app.post("/v1/enhance")
    async def enhance(req: Request):
        doc = await req.json()
        img = b64_to_image(doc["image_png_b64"])
        out = suite["enhance"].enhance_image(img, int(doc.get("scale", 2)))
        return {"image_png_b64": image_to_b64(out)}

    @app.post("/v1/vqa")
    async def vqa(req: Request):
        doc = await req.json()
        img = b64_to_image(doc["image_png_b64"])
        q = doc["question"]
        # recover the statement from the formatted question for the mock
        prefix, suffix = "Does this image show '", "'? Please answer 'yes' or 'no'."
        statement = q[len(prefix) : -len(suffix)] if q.startswith(prefix) else q
        return {"yes_probability": suite["vqa"].vqa_yes_probability(img, statement)}

    @app.post("/v1/qalign")
    async def qalign(req: Request):
        doc = await req.json()
        img = b64_to_image(doc["image_png_b64"])
        return {"score": suite["qalign"].qalign_quality(img)}

    return app


def run_mock_server(host: str = "127.0.0.1", port: int = 8411, seed: int = 0, transcripts=None):
    import uvicorn

    uvicorn.run(create_mock_app(seed=seed, transcripts=transcripts), host=host, port=port)
