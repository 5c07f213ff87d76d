"""HTTP render service over finished scenes.

Scenes load once into immutable in-memory snapshots (explicit
/scenes/refresh rescans the directory); /render rasterizes a posed view
and returns PNG bytes with the render time and a canonical echo of the
received pose in response headers, so clients can verify their pose
serialization round-trips losslessly.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from ..geometry import GeometryError, PerspectiveCamera
from ..imageio import encode_png_bytes
from ..iqa.brisque import load_brisque_model
from ..iqa.niqe import IqaError, load_niqe_model, niqe_score
from ..iqa.brisque import brisque_score
from ..splat.render import render
from ..splat.scene import load_scene

__all__ = ["create_render_app", "canonical_pose_json", "parse_pose"]

_ASSETS = Path(__file__).resolve().parents[1] / "assets"
MAX_RENDER_DIM = 2048


def _jsonable_number(x):
    f = float(x)
    return int(f) if f.is_integer() else f


def canonical_pose_json(pose: dict) -> str:
    """Compact sorted-key JSON with integral floats emitted as integers.

    Matches JavaScript's default number serialization so both ends of the
    echo check produce identical text for identical values.
    """
    canon = {
        "position": [_jsonable_number(v) for v in pose["position"]],
        "orientation": [_jsonable_number(v) for v in pose["orientation"]],
        "fov_x": _jsonable_number(pose["fov_x"]),
        "width": int(pose["width"]),
        "height": int(pose["height"]),
    }
    return json.dumps(canon, sort_keys=True, separators=(",", ":"))


def parse_pose(pose: dict) -> PerspectiveCamera:
    try:
        position = [float(v) for v in pose["position"]]
        orientation = [float(v) for v in pose["orientation"]]
        fov_x = float(pose["fov_x"])
        width = int(pose["width"])
        height = int(pose["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(422, detail=f"malformed pose: {exc}")
    if len(position) != 3 or len(orientation) != 4:
        raise HTTPException(422, detail="pose needs position[3] and orientation[4]")
    if not (1 <= width <= MAX_RENDER_DIM and 1 <= height <= MAX_RENDER_DIM):
        raise HTTPException(400, detail=f"render dims limited to {MAX_RENDER_DIM}")
    try:
        return PerspectiveCamera(
            position=np.asarray(position),
            orientation=np.asarray(orientation),
            fov_x=fov_x,
            width=width,
            height=height,
        )
    except GeometryError as exc:
        raise HTTPException(400, detail=f"invalid pose: {exc}")


class _Registry:
    def __init__(self, scenes_dir: Path):
        self.dir = Path(scenes_dir)
        self.scenes = {}
        self.refresh()

    def refresh(self):
        found = {}
        if self.dir.exists():
            for ply in sorted(self.dir.glob("*/scene.ply")):
                sid = ply.parent.name
                try:
                    found[sid] = {"scene": load_scene(ply), "path": ply}
                except Exception:
                    continue
        self.scenes = found  # atomic swap; old snapshots stay valid for readers

    def get(self, sid: str):
        entry = self.scenes.get(sid)
        if entry is None:
            raise HTTPException(404, detail=f"unknown scene {sid!r}")
        return entry


def create_render_app(scenes_dir, enhancer=None) -> FastAPI:
    registry = _Registry(Path(scenes_dir))
    app = FastAPI(title="poemscene render service")
    niqe_model = None
    brisque_model = None

    @app.get("/scenes")
    def scenes():
        out = []
        for sid, entry in sorted(registry.scenes.items()):
            s = entry["scene"]
            out.append(
                {
                    "id": sid,
                    "count": s.count,
                    "sh_degree": s.sh_degree,
                    "background": [float(v) for v in s.background],
                }
            )
        return out

    @app.post("/scenes/refresh")
    def refresh():
        registry.refresh()
        return {"scenes": sorted(registry.scenes)}

    @app.get("/scenes/{sid}/splat")
    def splat(sid: str):
        entry = registry.get(sid)
        return Response(
            content=Path(entry["path"]).read_bytes(), media_type="application/octet-stream"
        )

    @app.get("/scenes/{sid}/manifest")
    def manifest(sid: str):
        entry = registry.get(sid)
        path = Path(entry["path"]).parent / "manifest.json"
        if not path.exists():
            raise HTTPException(404, detail=f"scene {sid!r} has no manifest")
        return json.loads(path.read_text())

    @app.post("/render")
    async def render_view(request: Request):
        doc = await request.json()
        entry = registry.get(str(doc.get("scene", "")))
        cam = parse_pose(doc.get("pose", {}))
        t0 = time.perf_counter()
        rgb, _, _ = render(entry["scene"], cam)
        if doc.get("enhance") and enhancer is not None:
            rgb = enhancer.enhance_image(rgb, 2)
        millis = (time.perf_counter() - t0) * 1000.0
        return Response(
            content=encode_png_bytes(rgb),
            media_type="image/png",
            headers={
                "X-Render-Millis": f"{millis:.2f}",
                "X-Pose": canonical_pose_json(doc["pose"]),
            },
        )

    @app.post("/evaluate-frame")
    async def evaluate_frame(request: Request):
        nonlocal niqe_model, brisque_model
        doc = await request.json()
        entry = registry.get(str(doc.get("scene", "")))
        cam = parse_pose(doc.get("pose", {}))
        if niqe_model is None:
            niqe_model = load_niqe_model(_ASSETS / "iqa" / "niqe_model.json")
            brisque_model = load_brisque_model(_ASSETS / "iqa" / "brisque_model.json")
        rgb, _, _ = render(entry["scene"], cam)
        try:
            return {
                "niqe": float(niqe_score(rgb, niqe_model)),
                "brisque": float(brisque_score(rgb, brisque_model)),
            }
        except IqaError as exc:
            raise HTTPException(400, detail=str(exc))

    return app


def run_render_service(scenes_dir, host: str = "127.0.0.1", port: int = 8412, enhancer=None):
    import uvicorn

    uvicorn.run(create_render_app(scenes_dir, enhancer=enhancer), host=host, port=port)
