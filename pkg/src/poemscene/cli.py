"""Command-line entry points for the verse-to-scene engine.

Subcommands map one-to-one onto pipeline operations:

  parse        stage 1 only (literary parsing artifacts)
  generate     stages 2-3 (image, panorama)
  depth        stage 4
  init         stage 5 (dense point cloud)
  optimize     stage 6 (splat fitting)
  run          all six stages
  render       single posed render of a finished scene to PNG
  evaluate     orbit trajectory scoring (report.json/.csv)
  export       viewer-ready bundle (scene PLY + metadata + manifest)
  serve        HTTP render service
  mock-server  offline model-backend server
"""

from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from .parsing import HaikuInput
from .pipeline.config import ConfigError, load_config
from .pipeline.stages import PipelineRun, evaluate_run


def _add_common(p):
    p.add_argument("--config", help="YAML pipeline config", default=None)
    p.add_argument("--output-dir", help="override output directory", default=None)
    p.add_argument("--mock", action="store_true", help="force every backend to its mock")


def _load_cfg(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if overrides or args.mock:
        import dataclasses

        doc = dataclasses.asdict(cfg)
        doc.update(overrides)
        if args.mock:
            for role in ("llm", "llm_enhance", "t2i", "outpaint", "depth", "enhance", "vqa", "qalign"):
                if doc.get(role):
                    doc[role]["kind"] = "mock"
                    doc[role]["base_url"] = ""
        cfg = load_config(doc)
    return cfg


def _haiku_from(args) -> HaikuInput:
    if args.haiku_file:
        text = Path(args.haiku_file).read_text().strip()
    else:
        text = args.haiku
    if not text:
        raise SystemExit("provide --haiku or --haiku-file")
    return HaikuInput(text, id=args.id or "")


def _add_haiku(p):
    p.add_argument("--haiku", help="verse text", default=None)
    p.add_argument("--haiku-file", help="file containing the verse", default=None)
    p.add_argument("--id", help="stable run identifier", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="poemscene", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("parse", "generate", "depth", "init", "optimize", "run"):
        p = sub.add_parser(name)
        _add_common(p)
        _add_haiku(p)
        if name in ("optimize", "run"):
            p.add_argument("--iterations", type=int, default=None)

    p = sub.add_parser("render", help="render one posed view of a scene")
    p.add_argument("--scene", required=True, help="scene PLY path")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--pose", help="pose JSON file", default=None)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--fov", type=float, default=70.0, help="horizontal fov, degrees")
    p.add_argument("--position", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    p.add_argument("--yaw", type=float, default=0.0, help="degrees")
    p.add_argument("--pitch", type=float, default=0.0, help="degrees")

    p = sub.add_parser("evaluate", help="orbit-trajectory quality report")
    _add_common(p)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--frames", type=int, default=6)
    p.add_argument("--sweep", type=float, default=360.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=0.0)
    p.add_argument("--size", type=int, default=192)
    p.add_argument("--enhance", action="store_true")

    p = sub.add_parser("export", help="viewer bundle: scene + metadata + manifest")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="HTTP render service")
    p.add_argument("--scenes-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8412)
    p.add_argument("--enhance-mock", action="store_true", help="attach the mock enhancer")

    p = sub.add_parser("mock-server", help="offline backend server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8411)
    p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command

    if cmd in ("parse", "generate", "depth", "init", "optimize", "run"):
        cfg = _load_cfg(args)
        if getattr(args, "iterations", None) is not None:
            import dataclasses

            doc = dataclasses.asdict(cfg)
            doc["train"]["iterations"] = args.iterations
            cfg = load_config(doc)
        run = PipelineRun(_haiku_from(args), cfg)
        stages = {
            "parse": [run.stage_parse],
            "generate": [run.stage_parse, run.stage_t2i, run.stage_outpaint],
            "depth": [run.stage_parse, run.stage_t2i, run.stage_outpaint, run.stage_depth],
            "init": [
                run.stage_parse,
                run.stage_t2i,
                run.stage_outpaint,
                run.stage_depth,
                run.stage_init,
            ],
            "optimize": [run.run_all],
            "run": [run.run_all],
        }[cmd]
        for fn in stages:
            fn()
        print(f"run directory: {run.dir}")
        return 0

    if cmd == "render":
        from .geometry import PerspectiveCamera, look_at_quat
        from .imageio import encode_png_bytes
        from .splat.scene import load_scene
        from .splat.render import render

        scene = load_scene(args.scene)
        if args.pose:
            pose = json.loads(Path(args.pose).read_text())
            cam = PerspectiveCamera(
                np.asarray(pose["position"]),
                np.asarray(pose["orientation"]),
                float(pose["fov_x"]),
                int(pose["width"]),
                int(pose["height"]),
            )
        else:
            yaw, pitch = math.radians(args.yaw), math.radians(args.pitch)
            fwd = np.array(
                [
                    math.cos(pitch) * math.sin(yaw),
                    math.sin(pitch),
                    math.cos(pitch) * math.cos(yaw),
                ]
            )
            cam = PerspectiveCamera(
                np.asarray(args.position),
                look_at_quat(fwd, [0, 1, 0]),
                math.radians(args.fov),
                args.width,
                args.height,
            )
        rgb, _, _ = render(scene, cam)
        Path(args.out).write_bytes(encode_png_bytes(rgb))
        print(f"wrote {args.out}")
        return 0

    if cmd == "evaluate":
        cfg = _load_cfg(args)
        report = evaluate_run(
            args.run_dir,
            cfg,
            frames=args.frames,
            sweep_deg=args.sweep,
            pitch_deg=args.pitch,
            radius=args.radius,
            width=args.size,
            height=args.size,
            enhance=args.enhance,
        )
        print(json.dumps(report["aggregate"], indent=1, sort_keys=True))
        return 0

    if cmd == "export":
        run_dir = Path(args.run_dir)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        wanted = ["scene.ply", "scene.ply.meta.json", "manifest.json", "prompt.json"]
        for name in wanted:
            src = run_dir / name
            if src.exists():
                shutil.copy2(src, out / name)
        if not (out / "scene.ply").exists():
            raise SystemExit(f"no scene.ply in {run_dir}")
        print(f"exported bundle at {out}")
        return 0

    if cmd == "serve":
        from .backends.mock import MockEnhance
        from .pipeline.service import run_render_service

        run_render_service(
            args.scenes_dir,
            host=args.host,
            port=args.port,
            enhancer=MockEnhance() if args.enhance_mock else None,
        )
        return 0

    if cmd == "mock-server":
        from .backends.server import run_mock_server

        run_mock_server(host=args.host, port=args.port, seed=args.seed)
        return 0

    raise SystemExit(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
