"""Pipeline configuration: dataclasses, YAML loading, schema validation.

Defaults mirror the production stage settings (1024x1024 generation,
512x1024 outpainted panorama, 1024x2048 point-cloud panorama, 225-token
prompt budget); tests and desk-scale runs override them.  Validation
errors name the exact field path that failed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

__all__ = ["ConfigError", "BackendConfig", "Resolutions", "PipelineConfig", "load_config"]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" or "http"
    base_url: str = ""
    auth_env: str = ""
    timeout: float = 60.0
    retries: int = 2
    model: str = ""
    seed: int = 0

    def validate(self, path: str):
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"{path}.kind", f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ConfigError(f"{path}.base_url", "http backends require a base_url")
        if self.timeout <= 0:
            raise ConfigError(f"{path}.timeout", "must be positive")
        if self.retries < 0:
            raise ConfigError(f"{path}.retries", "must be >= 0")


@dataclass(frozen=True)
class Resolutions:
    t2i: int = 1024  # square generation
    outpaint_width: int = 1024
    outpaint_height: int = 512
    pointcloud_height: int = 1024  # panorama resized to H x 2H for unprojection
    tangent: int = 256  # tangent target resolution
    tangent_fov_deg: float = 75.0

    def validate(self, path: str):
        if self.t2i < 64:
            raise ConfigError(f"{path}.t2i", "must be >= 64")
        if self.outpaint_width != 2 * self.outpaint_height:
            raise ConfigError(f"{path}.outpaint_width", "panorama must be 2:1")
        if self.pointcloud_height < 16:
            raise ConfigError(f"{path}.pointcloud_height", "must be >= 16")
        if self.tangent < 16:
            raise ConfigError(f"{path}.tangent", "must be >= 16")
        if not 30.0 <= self.tangent_fov_deg <= 120.0:
            raise ConfigError(f"{path}.tangent_fov_deg", "must lie in [30, 120]")

    @property
    def pointcloud_width(self) -> int:
        return 2 * self.pointcloud_height


@dataclass(frozen=True)
class DepthConfig:
    mode: str = "affine-normalize"
    near: float = 0.5
    far: float = 50.0

    def validate(self, path: str):
        if self.mode not in ("affine-normalize", "metric-passthrough"):
            raise ConfigError(f"{path}.mode", f"unknown mode {self.mode!r}")
        if not 0 < self.near < self.far:
            raise ConfigError(f"{path}.near", "requires 0 < near < far")


@dataclass(frozen=True)
class PerturbSettings:
    base_range: float = 0.05
    lambdas: tuple = (1, 2, 4)
    views_per_stage: int = 10

    def validate(self, path: str):
        if self.base_range <= 0:
            raise ConfigError(f"{path}.base_range", "must be positive")
        lams = tuple(self.lambdas)
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ConfigError(f"{path}.lambdas", "must be strictly increasing")
        if self.views_per_stage < 0:
            raise ConfigError(f"{path}.views_per_stage", "must be >= 0")


@dataclass(frozen=True)
class TrainSettings:
    iterations: int = 300
    lr_position: float = 1.6e-4
    lr_sh: float = 2.5e-3
    lr_opacity: float = 5e-2
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    ssim_weight: float = 0.2
    views_per_step: int = 1
    early_stop: bool = True

    def validate(self, path: str):
        if self.iterations < 0:
            raise ConfigError(f"{path}.iterations", "must be >= 0")
        for name in ("lr_position", "lr_sh", "lr_opacity", "lr_scale", "lr_rotation"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{path}.{name}", "must be positive")
        if not 0.0 <= self.ssim_weight <= 1.0:
            raise ConfigError(f"{path}.ssim_weight", "must lie in [0, 1]")


@dataclass(frozen=True)
class Ablation:
    disable_enhancement: bool = False
    disable_key_elements: bool = False

    def validate(self, path: str):
        pass


@dataclass(frozen=True)
class Seeds:
    t2i: int = 1
    outpaint: int = 2
    perturbation: int = 3
    training: int = 4

    def validate(self, path: str):
        pass


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: str = "runs"
    token_budget: int = 225
    subsample_stride: int = 1
    sh_degree: int = 2
    llm: BackendConfig = field(default_factory=BackendConfig)
    llm_enhance: Optional[BackendConfig] = None  # stage 3 may use its own model
    t2i: BackendConfig = field(default_factory=BackendConfig)
    outpaint: BackendConfig = field(default_factory=BackendConfig)
    depth: BackendConfig = field(default_factory=BackendConfig)
    enhance: BackendConfig = field(default_factory=BackendConfig)
    vqa: Optional[BackendConfig] = None
    qalign: Optional[BackendConfig] = None
    resolutions: Resolutions = field(default_factory=Resolutions)
    depth_calibration: DepthConfig = field(default_factory=DepthConfig)
    perturbation: PerturbSettings = field(default_factory=PerturbSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    ablation: Ablation = field(default_factory=Ablation)
    seeds: Seeds = field(default_factory=Seeds)

    def validate(self):
        if self.token_budget < 8:
            raise ConfigError("token_budget", "must be >= 8")
        if self.subsample_stride < 1:
            raise ConfigError("subsample_stride", "must be >= 1")
        if not 0 <= self.sh_degree <= 3:
            raise ConfigError("sh_degree", "must lie in 0..3")
        for name in ("llm", "t2i", "outpaint", "depth", "enhance"):
            getattr(self, name).validate(name)
        for name in ("llm_enhance", "vqa", "qalign"):
            val = getattr(self, name)
            if val is not None:
                val.validate(name)
        self.resolutions.validate("resolutions")
        self.depth_calibration.validate("depth_calibration")
        self.perturbation.validate("perturbation")
        self.train.validate("train")
        return self

    def fingerprint(self) -> str:
        import hashlib

        doc = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(doc.encode()).hexdigest()


def _build(cls, doc, path: str):
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise ConfigError(path or cls.__name__, f"expected a mapping, got {type(doc).__name__}")
    known = {f.name: f for f in fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    kwargs = {}
    for name, f in known.items():
        if name not in doc:
            continue
        val = doc[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.type) if isinstance(f.type, type) else False:
            kwargs[name] = _build(f.type, val, sub)
            continue
        target = _FIELD_TYPES.get((cls.__name__, name))
        if target is not None:
            kwargs[name] = _build(target, val, sub)
            continue
        if isinstance(val, list):
            val = tuple(val)
        kwargs[name] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or cls.__name__, str(exc)) from exc


_FIELD_TYPES = {
    ("PipelineConfig", "llm"): BackendConfig,
    ("PipelineConfig", "llm_enhance"): BackendConfig,
    ("PipelineConfig", "t2i"): BackendConfig,
    ("PipelineConfig", "outpaint"): BackendConfig,
    ("PipelineConfig", "depth"): BackendConfig,
    ("PipelineConfig", "enhance"): BackendConfig,
    ("PipelineConfig", "vqa"): BackendConfig,
    ("PipelineConfig", "qalign"): BackendConfig,
    ("PipelineConfig", "resolutions"): Resolutions,
    ("PipelineConfig", "depth_calibration"): DepthConfig,
    ("PipelineConfig", "perturbation"): PerturbSettings,
    ("PipelineConfig", "train"): TrainSettings,
    ("PipelineConfig", "ablation"): Ablation,
    ("PipelineConfig", "seeds"): Seeds,
}


def load_config(source) -> PipelineConfig:
    """Build a validated config from a YAML file path, dict, or None."""
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text()
        doc = yaml.safe_load(text) or {}
    cfg = _build(PipelineConfig, doc, "")
    cfg.validate()
    return cfg
