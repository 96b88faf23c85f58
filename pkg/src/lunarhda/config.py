"""Pipeline configuration: nested dataclasses loaded from a JSON file."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .camera import CameraIntrinsics
from .errors import ParseError
from .site_assess import AssessConfig
from .synth import DescentParams


@dataclass
class CameraConfig:
    fx: float = 7363.60
    fy: float = 7363.60
    cx: float = 1295.5
    cy: float = 971.5
    width: int = 2592
    height: int = 1944
    fov_deg: float = 45.0
    cant_deg: float = 45.0

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy, self.width, self.height, self.fov_deg)


@dataclass
class MaskConfig:
    min_leaf: int = 8
    margin: float = 0
    score_threshold: float = 0.5


@dataclass
class ReconstructionConfig:
    max_reproj_px: float = 2.0
    refine: bool = False


@dataclass
class SceneConfig:
    ncols: int = 512
    nrows: int = 512
    cellsize: float = 0.5
    amplitude_m: float = 2.0
    smoothness: float = 3.0
    rock_density: float = 0.002  # per m^2
    crater_density: float = 0.0003
    q_exponent: float = 2.0
    d_min: float = 0.3
    d_max: float = 3.0
    crater_d_min: float = 1.0
    crater_d_max: float = 10.0
    rock_count: Optional[int] = None
    crater_count: Optional[int] = None
    hazard_half_extent_m: Optional[float] = None
    descent: DescentParams = field(default_factory=DescentParams)
    n_correspondences: int = 20000
    noise_px: float = 0.1
    miss_rate: float = 0.0
    jitter_px: float = 0.0


@dataclass
class PathsConfig:
    detections: Optional[str] = None
    correspondences: Optional[str] = None
    scene: Optional[str] = None


@dataclass
class BenchConfig:
    repeats: int = 20
    n_hazards: int = 250
    hazard_half_extent_m: float = 50.0


@dataclass
class PipelineConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    assess: AssessConfig = field(default_factory=AssessConfig)
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    synth: SceneConfig = field(default_factory=SceneConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    vfde_side_m: float = 10.0
    base_dir: Optional[str] = field(default=None, metadata={"internal": True})

    def __post_init__(self):
        if not self.vfde_side_m > 0:
            raise ValueError("vfde_side_m must be positive")

    def resolve(self, p: Optional[str]) -> Optional[Path]:
        """Paths in the file are relative to the config file's directory."""
        if p is None:
            return None
        path = Path(p)
        if not path.is_absolute() and self.base_dir is not None:
            path = Path(self.base_dir) / path
        return path


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ParseError(f"{where or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls) if not f.metadata.get("internal")}
    unknown = set(data) - set(fields)
    if unknown:
        raise ParseError(f"{where or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        sub = default() if default is not None else None
        if dataclasses.is_dataclass(sub):
            kwargs[name] = _build(type(sub), value, f"{where}.{name}" if where else name)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where or 'config'}: {exc}") from None


def config_from_dict(data: dict, base_dir=None) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "")
    cfg.base_dir = None if base_dir is None else str(base_dir)
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    return config_from_dict(data, path.parent)


def config_to_dict(cfg: PipelineConfig) -> dict:
    def conv(obj):
        if dataclasses.is_dataclass(obj):
            return {
                f.name: conv(getattr(obj, f.name))
                for f in dataclasses.fields(obj)
                if not f.metadata.get("internal")
            }
        if isinstance(obj, tuple):
            return list(obj)
        return obj

    return conv(cfg)
