"""The six-stage verse-to-scene pipeline with content-hash resume.

parse -> text-to-image -> panorama outpaint -> depth -> point cloud ->
splat optimization.  Every stage persists its artifacts under the run
directory and records input fingerprints in the manifest; re-running with
unchanged inputs performs zero backend calls.  Evaluation and the render
service live beside the pipeline and consume its artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from pathlib import Path

import numpy as np

from .. import parsing
from ..backends import http as http_backends
from ..backends import mock as mock_backends
from ..backends.base import BackendEndpoint
from ..backends.types import OutpaintRequest, front_face_mask
from ..geometry import (
    ImageBuffer,
    PanoImage,
    pano_to_cubemap,
    resize_bilinear,
    tangent_cameras,
)
from ..imageio import (
    load_color_png,
    load_depth_png,
    save_color_png,
    save_depth_png,
)
from ..iqa.brisque import load_brisque_model
from ..iqa.niqe import load_niqe_model
from ..iqa.trajectory import evaluate_trajectory, orbit_trajectory, report_to_csv, save_report
from ..optim.trainer import TrainConfig, optimize, save_checkpoint
from ..optim.views import PerturbationConfig, build_training_set
from ..pointcloud import DepthCalibration, calibrate_depth, depth_pano_to_points, save_ply, load_ply, subsample
from ..splat.render import render
from ..splat.scene import init_from_pointcloud, load_scene
from .config import PipelineConfig
from .manifest import Manifest, file_hash, value_hash

__all__ = ["make_backend", "run_pipeline", "evaluate_run", "default_transcripts_path"]

_ASSETS = Path(__file__).resolve().parents[1] / "assets"

_HTTP_CLIENTS = {
    "llm": http_backends.HttpLlm,
    "t2i": http_backends.HttpTextToImage,
    "outpaint": http_backends.HttpOutpaint,
    "depth": http_backends.HttpDepth,
    "enhance": http_backends.HttpEnhance,
    "vqa": http_backends.HttpVqa,
    "qalign": http_backends.HttpQalign,
}
_MOCK_CLIENTS = {
    "llm": lambda cfg, transcripts: mock_backends.MockLlm(transcripts, seed=cfg.seed),
    "t2i": lambda cfg, _: mock_backends.MockTextToImage(cfg.seed),
    "outpaint": lambda cfg, _: mock_backends.MockOutpaint(cfg.seed),
    "depth": lambda cfg, _: mock_backends.MockDepth(cfg.seed),
    "enhance": lambda cfg, _: mock_backends.MockEnhance(cfg.seed),
    "vqa": lambda cfg, _: mock_backends.MockVqa(cfg.seed),
    "qalign": lambda cfg, _: mock_backends.MockQalign(cfg.seed),
}


def default_transcripts_path() -> Path:
    return _ASSETS / "transcripts" / "old_pond.json"


def make_backend(role: str, cfg, transcripts=None):
    """Instantiate a backend client for a role from its config block."""
    if cfg is None:
        return None
    if cfg.kind == "mock":
        if role == "llm" and transcripts is None:
            path = default_transcripts_path()
            transcripts = str(path) if path.exists() else None
        return _MOCK_CLIENTS[role](cfg, transcripts)
    endpoint = BackendEndpoint(
        base_url=cfg.base_url,
        auth_env=cfg.auth_env,
        timeout=cfg.timeout,
        retries=cfg.retries,
        model=cfg.model,
    )
    return _HTTP_CLIENTS[role](endpoint)


def _backend_id(cfg) -> str:
    return f"{cfg.kind}:{cfg.model or cfg.seed}"


class PipelineRun:
    """Bound (config, haiku, backends, manifest) with one method per stage."""

    def __init__(self, haiku: parsing.HaikuInput, cfg: PipelineConfig, backends=None):
        self.haiku = haiku
        self.cfg = cfg
        self.dir = Path(cfg.output_dir) / haiku.id
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest.load_or_create(haiku.id, self.dir, cfg.fingerprint())
        self.backends = backends or {}

    def backend(self, role: str):
        if role not in self.backends:
            block = {
                "llm": self.cfg.llm,
                "llm_enhance": self.cfg.llm_enhance or self.cfg.llm,
                "t2i": self.cfg.t2i,
                "outpaint": self.cfg.outpaint,
                "depth": self.cfg.depth,
                "enhance": self.cfg.enhance,
                "vqa": self.cfg.vqa,
                "qalign": self.cfg.qalign,
            }[role]
            client_role = "llm" if role == "llm_enhance" else role
            self.backends[role] = make_backend(client_role, block)
        return self.backends[role]

    def _run_stage(self, name: str, fingerprint_doc, outputs: dict, fn, backend_id: str = "", seed=None):
        fp = value_hash(fingerprint_doc)
        if self.manifest.can_skip(name, fp):
            return False
        try:
            fn()
        except Exception as exc:
            self.manifest.record_failure(name, fp, f"{type(exc).__name__}: {exc}")
            raise
        self.manifest.record(name, fp, outputs, backend=backend_id, seed=seed)
        return True

    # ---- stage 1: literary parse --------------------------------------

    def stage_parse(self):
        cfg = self.cfg
        fingerprint = {
            "haiku": self.haiku.text,
            "hint": self.haiku.language_hint,
            "budget": cfg.token_budget,
            "ablation": dataclasses.asdict(cfg.ablation),
            "backend": _backend_id(cfg.llm),
            "backend3": _backend_id(cfg.llm_enhance or cfg.llm),
            "templates": [
                file_hash(parsing._TEMPLATES / n)
                for n in ("stage1.txt", "stage2.txt", "stage3.txt")
            ],
        }
        outputs = {
            "analysis": "analysis.json",
            "elements": "elements.json",
            "prompt": "prompt.json",
        }

        def run():
            t2i = self.backend("t2i")
            counter = t2i.count_tokens if hasattr(t2i, "count_tokens") else None
            analysis, elements, prompt = parsing.parse_haiku(
                self.haiku,
                self.backend("llm"),
                self.backend("llm_enhance"),
                count_tokens=counter or parsing.estimate_tokens,
                budget=cfg.token_budget,
                disable_enhancement=cfg.ablation.disable_enhancement,
                disable_key_elements=cfg.ablation.disable_key_elements,
            )
            (self.dir / "analysis.json").write_text(
                json.dumps(dataclasses.asdict(analysis), indent=1, sort_keys=True) + "\n"
            )
            (self.dir / "elements.json").write_text(
                json.dumps(dataclasses.asdict(elements), indent=1, sort_keys=True) + "\n"
            )
            (self.dir / "prompt.json").write_text(
                json.dumps(dataclasses.asdict(prompt), indent=1, sort_keys=True) + "\n"
            )

        return self._run_stage("parse", fingerprint, outputs, run, _backend_id(cfg.llm))

    def _prompt_text(self) -> str:
        return json.loads((self.dir / "prompt.json").read_text())["text"]

    # ---- stage 2: text to image ----------------------------------------

    def stage_t2i(self):
        cfg = self.cfg
        fingerprint = {
            "prompt": file_hash(self.dir / "prompt.json"),
            "seed": cfg.seeds.t2i,
            "size": cfg.resolutions.t2i,
            "backend": _backend_id(cfg.t2i),
        }

        def run():
            img = self.backend("t2i").text_to_image(
                self._prompt_text(), cfg.seeds.t2i, cfg.resolutions.t2i, cfg.resolutions.t2i
            )
            save_color_png(img, self.dir / "t2i.png")

        return self._run_stage(
            "t2i", fingerprint, {"image": "t2i.png"}, run, _backend_id(cfg.t2i), cfg.seeds.t2i
        )

    # ---- stage 3: panorama outpaint -------------------------------------

    def stage_outpaint(self):
        cfg = self.cfg
        fingerprint = {
            "image": file_hash(self.dir / "t2i.png"),
            "prompt": file_hash(self.dir / "prompt.json"),
            "seed": cfg.seeds.outpaint,
            "size": [cfg.resolutions.outpaint_width, cfg.resolutions.outpaint_height],
            "backend": _backend_id(cfg.outpaint),
        }

        def run():
            img = load_color_png(self.dir / "t2i.png")
            face = resize_bilinear(img, 512, 512)
            req = OutpaintRequest(
                central_face=face,
                mask=front_face_mask(
                    cfg.resolutions.outpaint_height, cfg.resolutions.outpaint_width
                ),
                prompt=self._prompt_text(),
                seed=cfg.seeds.outpaint,
                width=cfg.resolutions.outpaint_width,
                height=cfg.resolutions.outpaint_height,
            )
            pano = self.backend("outpaint").outpaint_panorama(req)
            save_color_png(pano.buffer, self.dir / "pano.png")

        return self._run_stage(
            "outpaint",
            fingerprint,
            {"pano": "pano.png"},
            run,
            _backend_id(cfg.outpaint),
            cfg.seeds.outpaint,
        )

    # ---- stage 4: panoramic depth ---------------------------------------

    def stage_depth(self):
        cfg = self.cfg
        fingerprint = {
            "pano": file_hash(self.dir / "pano.png"),
            "backend": _backend_id(cfg.depth),
        }

        def run():
            pano = PanoImage(load_color_png(self.dir / "pano.png"))
            depth = self.backend("depth").estimate_depth(pano)
            save_depth_png(depth.buffer, self.dir / "depth.png")

        return self._run_stage(
            "depth", fingerprint, {"depth": "depth.png"}, run, _backend_id(cfg.depth)
        )

    # ---- stage 5: dense point cloud --------------------------------------

    def stage_init(self):
        cfg = self.cfg
        fingerprint = {
            "pano": file_hash(self.dir / "pano.png"),
            "depth": file_hash(self.dir / "depth.png"),
            "height": cfg.resolutions.pointcloud_height,
            "calibration": dataclasses.asdict(cfg.depth_calibration),
            "stride": cfg.subsample_stride,
        }

        def run():
            h = cfg.resolutions.pointcloud_height
            w = cfg.resolutions.pointcloud_width
            pano = PanoImage(
                resize_bilinear(load_color_png(self.dir / "pano.png"), h, w, wrap_x=True)
            )
            depth = PanoImage(
                resize_bilinear(load_depth_png(self.dir / "depth.png"), h, w, wrap_x=True)
            )
            calib = DepthCalibration(
                cfg.depth_calibration.mode, cfg.depth_calibration.near, cfg.depth_calibration.far
            )
            cloud = depth_pano_to_points(pano, depth, calib)
            cloud = subsample(cloud, cfg.subsample_stride)
            save_ply(cloud, self.dir / "cloud.ply")

        return self._run_stage("init", fingerprint, {"cloud": "cloud.ply"}, run)

    # ---- stage 6: splat optimization --------------------------------------

    def stage_optimize(self):
        cfg = self.cfg
        fingerprint = {
            "cloud": file_hash(self.dir / "cloud.ply"),
            "pano": file_hash(self.dir / "pano.png"),
            "depth": file_hash(self.dir / "depth.png"),
            "train": dataclasses.asdict(cfg.train),
            "perturbation": dataclasses.asdict(cfg.perturbation),
            "seeds": [cfg.seeds.perturbation, cfg.seeds.training],
            "tangent": [cfg.resolutions.tangent, cfg.resolutions.tangent_fov_deg],
            "sh_degree": cfg.sh_degree,
        }
        outputs = {
            "scene": "scene.ply",
            "meta": "scene.ply.meta.json",
            "train_state": "scene.ply.train.json",
            "train_render": "train_render_0.png",
            "train_pose": "train_pose_0.json",
        }

        def run():
            h = cfg.resolutions.pointcloud_height
            w = cfg.resolutions.pointcloud_width
            pano = PanoImage(
                resize_bilinear(load_color_png(self.dir / "pano.png"), h, w, wrap_x=True)
            )
            depth_rel = PanoImage(
                resize_bilinear(load_depth_png(self.dir / "depth.png"), h, w, wrap_x=True)
            )
            calib = DepthCalibration(
                cfg.depth_calibration.mode, cfg.depth_calibration.near, cfg.depth_calibration.far
            )
            depth_world = calibrate_depth(depth_rel, calib)

            cloud = load_ply(self.dir / "cloud.ply")
            scene = init_from_pointcloud(cloud, sh_degree=cfg.sh_degree)

            cams = tangent_cameras(
                20,
                math.radians(cfg.resolutions.tangent_fov_deg),
                cfg.resolutions.tangent,
            )
            pcfg = PerturbationConfig(
                base_range=cfg.perturbation.base_range,
                lambdas=cfg.perturbation.lambdas,
                views_per_stage=cfg.perturbation.views_per_stage,
                seed=cfg.seeds.perturbation,
            )
            views = build_training_set(pano, depth_world, cams, pcfg)
            tcfg = TrainConfig(
                iterations=cfg.train.iterations,
                lr_position=cfg.train.lr_position,
                lr_sh=cfg.train.lr_sh,
                lr_opacity=cfg.train.lr_opacity,
                lr_scale=cfg.train.lr_scale,
                lr_rotation=cfg.train.lr_rotation,
                ssim_weight=cfg.train.ssim_weight,
                seed=cfg.seeds.training,
                views_per_step=cfg.train.views_per_step,
                early_stop=cfg.train.early_stop,
            )
            fitted, history = optimize(scene, views, tcfg)
            save_checkpoint(
                fitted,
                self.dir / "scene.ply",
                iteration=len(history),
                seeds={"perturbation": cfg.seeds.perturbation, "training": cfg.seeds.training},
                history=history,
            )
            # parity record: render the persisted scene through a tangent pose,
            # using the same PNG encoder the render service serves bytes with
            persisted = load_scene(self.dir / "scene.ply")
            cam0 = views[0].camera
            rgb, _, _ = render(persisted, cam0)
            from ..imageio import encode_png_bytes

            (self.dir / "train_render_0.png").write_bytes(encode_png_bytes(rgb))
            (self.dir / "train_pose_0.json").write_text(
                json.dumps(
                    {
                        "position": [float(v) for v in cam0.position],
                        "orientation": [float(v) for v in cam0.orientation],
                        "fov_x": cam0.fov_x,
                        "width": cam0.width,
                        "height": cam0.height,
                    },
                    indent=1,
                    sort_keys=True,
                )
                + "\n"
            )

        return self._run_stage("optimize", fingerprint, outputs, run, seed=cfg.seeds.training)

    def run_all(self):
        """Execute every stage in order; returns the manifest."""
        self.stage_parse()
        self.stage_t2i()
        self.stage_outpaint()
        self.stage_depth()
        self.stage_init()
        self.stage_optimize()
        return self.manifest


def run_pipeline(haiku: parsing.HaikuInput, cfg: PipelineConfig, backends=None) -> Manifest:
    return PipelineRun(haiku, cfg, backends).run_all()


def evaluate_run(
    run_dir,
    cfg: PipelineConfig,
    frames: int = 6,
    sweep_deg: float = 360.0,
    pitch_deg: float = 0.0,
    radius: float = 0.0,
    width: int = 192,
    height: int = 192,
    enhance: bool = False,
    niqe_model_path=None,
    brisque_model_path=None,
) -> dict:
    """Score a finished scene along an orbit; writes report.json/.csv."""
    run_dir = Path(run_dir)
    scene_path = run_dir / "scene.ply"
    if not scene_path.exists():
        raise FileNotFoundError(f"no scene at {scene_path}; run the pipeline first")
    scene = load_scene(scene_path)
    traj = orbit_trajectory(
        frames=frames,
        yaw_sweep=math.radians(sweep_deg),
        pitch=math.radians(pitch_deg),
        radius=radius,
        width=width,
        height=height,
    )
    niqe_model = load_niqe_model(niqe_model_path or _ASSETS / "iqa" / "niqe_model.json")
    brisque_model = load_brisque_model(
        brisque_model_path or _ASSETS / "iqa" / "brisque_model.json"
    )
    prompt = ""
    prompt_file = run_dir / "prompt.json"
    if prompt_file.exists():
        prompt = json.loads(prompt_file.read_text())["text"]
    report = evaluate_trajectory(
        scene,
        traj,
        niqe_model,
        brisque_model,
        qalign=make_backend("qalign", cfg.qalign),
        vqa=make_backend("vqa", cfg.vqa),
        prompt=prompt,
        enhancer=make_backend("enhance", cfg.enhance) if enhance else None,
    )
    save_report(report, run_dir / "report.json")
    report_to_csv(report, run_dir / "report.csv")
    return report
