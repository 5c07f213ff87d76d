"""Adaptive-moment scene fitting with a staged virtual-view curriculum.

The gaussian count never changes (densification stays disabled); each
iteration renders one training view (seeded round-robin order), computes
the photometric loss, backpropagates through the renderer, and applies a
per-parameter-group Adam step.  Position steps scale with the scene
extent and decay exponentially; quaternions are renormalized after every
step.  Lambda-staged views join the pool at iteration thirds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import GeometryError
from ..splat.backward import render_backward
from ..splat.render import render_arrays
from ..splat.scene import SplatScene, load_scene, save_scene
from .loss import l1_ssim_loss

__all__ = ["TrainConfig", "OptimizeDiverged", "optimize", "save_checkpoint", "load_checkpoint"]


class OptimizeDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 300
    lr_position: float = 1.6e-4  # scaled by scene extent, exponential decay
    lr_sh: float = 2.5e-3
    lr_opacity: float = 5e-2
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    ssim_weight: float = 0.2
    seed: int = 0
    views_per_step: int = 1  # 0 = average every active view each step
    position_lr_final_mult: float = 0.01
    early_stop: bool = True
    early_stop_window: int = 100
    early_stop_rel: float = 1e-3

    def __post_init__(self):
        if self.iterations < 0:
            raise GeometryError("iterations must be >= 0")
        for name in ("lr_position", "lr_sh", "lr_opacity", "lr_scale", "lr_rotation"):
            if getattr(self, name) <= 0:
                raise GeometryError(f"{name} must be positive")
        if not 0.0 <= self.ssim_weight <= 1.0:
            raise GeometryError("ssim_weight must lie in [0, 1]")


class _Adam:
    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray, lr_mult: float = 1.0):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mh = self.m / (1 - self.beta1**self.t)
        vh = self.v / (1 - self.beta2**self.t)
        param -= self.lr * lr_mult * mh / (np.sqrt(vh) + self.eps)


def _active_pool(views, lambdas, iteration: int, total: int):
    """Tangent views always train; lambda stages unlock at iteration thirds."""
    if total <= 0:
        return list(range(len(views)))
    third = max(total / 3.0, 1e-9)
    n_stages = min(int(iteration / third) + 1, len(lambdas))
    enabled = set(lambdas[:n_stages])
    return [
        i
        for i, v in enumerate(views)
        if v.stage == "tangent" or v.stage in enabled
    ]


def optimize(scene: SplatScene, views, cfg: TrainConfig):
    """Fit the scene to the views; returns (new scene, per-iteration loss)."""
    if not views:
        raise GeometryError("optimize requires at least one training view")
    if cfg.iterations == 0:
        return scene, []

    out = scene.copy()
    extent = out.extent()
    lambdas = sorted({v.stage for v in views if v.stage != "tangent"})

    opt = {
        "positions": _Adam(out.positions.shape, cfg.lr_position * extent),
        "alpha_logit": _Adam(out.alpha_logit.shape, cfg.lr_opacity),
        "sh": _Adam(out.sh.shape, cfg.lr_sh),
        "s_log": _Adam(out.s_log.shape, cfg.lr_scale),
        "q": _Adam(out.q.shape, cfg.lr_rotation),
    }
    params = {
        "positions": out.positions,
        "alpha_logit": out.alpha_logit,
        "sh": out.sh,
        "s_log": out.s_log,
        "q": out.q,
    }

    rng = np.random.default_rng(cfg.seed)
    history = []
    targets = [np.asarray(v.target.data, dtype=np.float64) for v in views]

    for it in range(cfg.iterations):
        pool = _active_pool(views, lambdas, it, cfg.iterations)
        if cfg.views_per_step <= 0 or cfg.views_per_step >= len(pool):
            batch = pool
        else:
            batch = [
                pool[int(i)]
                for i in rng.choice(len(pool), size=cfg.views_per_step, replace=False)
            ]

        value = 0.0
        grads = None
        for vi in batch:
            view = views[vi]
            rgb, _, _, proj = render_arrays(out, view.camera)
            v, dldc = l1_ssim_loss(rgb, targets[vi], cfg.ssim_weight)
            value += v / len(batch)
            g = render_backward(out, view.camera, dldc, projection=proj)
            if grads is None:
                grads = {k: val / len(batch) for k, val in g.items()}
            else:
                for k in grads:
                    grads[k] += g[k] / len(batch)
        if not np.isfinite(value):
            raise OptimizeDiverged(f"non-finite loss {value} at iteration {it}")
        history.append(float(value))

        decay = cfg.position_lr_final_mult ** (it / max(cfg.iterations - 1, 1))
        for name, adam in opt.items():
            adam.step(params[name], grads[name], lr_mult=decay if name == "positions" else 1.0)
        out.q /= np.linalg.norm(out.q, axis=1, keepdims=True)

        if (
            cfg.early_stop
            and it + 1 >= 2 * cfg.early_stop_window
            and (it + 1) % cfg.early_stop_window == 0
        ):
            w = cfg.early_stop_window
            recent = float(np.mean(history[-w:]))
            previous = float(np.mean(history[-2 * w : -w]))
            if previous > 0 and (previous - recent) / previous < cfg.early_stop_rel:
                break
    return out, history


def save_checkpoint(scene: SplatScene, path, iteration: int, seeds: dict, history=None):
    """Scene PLY plus a JSON training-state sidecar."""
    save_scene(scene, path)
    state = {
        "iteration": int(iteration),
        "seeds": {k: int(v) for k, v in seeds.items()},
        "loss_history_tail": [float(v) for v in (history or [])[-50:]],
    }
    Path(str(path) + ".train.json").write_text(json.dumps(state, sort_keys=True) + "\n")


def load_checkpoint(path):
    scene = load_scene(path)
    state_path = Path(str(path) + ".train.json")
    state = json.loads(state_path.read_text()) if state_path.exists() else {}
    return scene, state
