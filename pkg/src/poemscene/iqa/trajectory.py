"""Camera-trajectory rendering and per-frame quality evaluation.

A trajectory is an orbit parameterization (yaw sweep, pitch, radial
translation, frame count) expanded into explicit camera poses.  Each
frame renders through the splat renderer, optionally passes through the
enhancement backend, and is scored with NIQE and BRISQUE; QAlign quality
and VQA yes-probability are added when those backends are configured.
Backend failures are recorded per frame and excluded from the aggregate,
which notes the success count per metric.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..geometry import ImageBuffer, PerspectiveCamera, look_at_quat
from ..splat.render import render
from .brisque import BrisqueModel, brisque_score
from .niqe import NiqeModel, niqe_score

__all__ = ["Trajectory", "orbit_trajectory", "evaluate_trajectory", "report_to_csv"]


@dataclass(frozen=True)
class Trajectory:
    cameras: tuple

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 1:
            raise ValueError("trajectory needs at least one frame")
        object.__setattr__(self, "cameras", cams)

    def __len__(self):
        return len(self.cameras)


def orbit_trajectory(
    frames: int = 6,
    yaw_start: float = 0.0,
    yaw_sweep: float = 2.0 * math.pi,
    pitch: float = 0.0,
    radius: float = 0.0,
    center=(0.0, 0.0, 0.0),
    fov_x: float = math.radians(70.0),
    width: int = 192,
    height: int = 192,
) -> Trajectory:
    """Horizontal sweep of `frames` poses; radius slides along each view ray."""
    center = np.asarray(center, dtype=np.float64)
    cams = []
    for k in range(frames):
        yaw = yaw_start + yaw_sweep * k / frames
        fwd = np.array(
            [math.cos(pitch) * math.sin(yaw), math.sin(pitch), math.cos(pitch) * math.cos(yaw)]
        )
        pos = center + radius * fwd
        cams.append(
            PerspectiveCamera(pos, look_at_quat(fwd, [0.0, 1.0, 0.0]), fov_x, width, height)
        )
    return Trajectory(tuple(cams))


def _pose_record(cam: PerspectiveCamera) -> dict:
    return {
        "position": [float(v) for v in cam.position],
        "orientation": [float(v) for v in cam.orientation],
        "fov_x": float(cam.fov_x),
        "width": cam.width,
        "height": cam.height,
    }


def evaluate_trajectory(
    scene,
    traj: Trajectory,
    niqe_model: NiqeModel,
    brisque_model: BrisqueModel,
    qalign=None,
    vqa=None,
    prompt: str = "",
    enhancer=None,
    enhance_scale: int = 2,
) -> dict:
    """Per-frame records plus per-metric aggregates over successful frames."""
    records = []
    for idx, cam in enumerate(traj.cameras):
        rgb, _, _ = render(scene, cam)
        if enhancer is not None:
            rgb = enhancer.enhance_image(rgb, enhance_scale)
        rec = {"frame": idx, "pose": _pose_record(cam)}
        rec["niqe"] = float(niqe_score(rgb, niqe_model))
        rec["brisque"] = float(brisque_score(rgb, brisque_model))
        if qalign is not None:
            try:
                rec["qalign"] = float(qalign.qalign_quality(rgb))
            except Exception as exc:  # backend failures are per-frame data
                rec["qalign_error"] = str(exc)
        if vqa is not None:
            try:
                rec["vqascore"] = float(vqa.vqa_yes_probability(rgb, prompt))
            except Exception as exc:
                rec["vqascore_error"] = str(exc)
        records.append(rec)

    aggregate = {}
    for metric in ("niqe", "brisque", "qalign", "vqascore"):
        vals = [r[metric] for r in records if metric in r]
        if vals:
            aggregate[metric] = {"mean": float(np.mean(vals)), "count": len(vals)}
    return {"frames": records, "aggregate": aggregate, "prompt": prompt}


def save_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


def report_to_csv(report: dict, path) -> None:
    """Flat per-frame table for spreadsheets."""
    metrics = ("niqe", "brisque", "qalign", "vqascore")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "px", "py", "pz"] + list(metrics))
        for rec in report["frames"]:
            row = [rec["frame"]] + [f"{v:.6g}" for v in rec["pose"]["position"]]
            row += [f"{rec[m]:.6f}" if m in rec else "" for m in metrics]
            writer.writerow(row)
