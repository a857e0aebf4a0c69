"""Experiment configuration files.

A config is one YAML document with a section per component. Unknown keys
are rejected so typos fail loudly, and ``dumps(loads(text))`` is stable.
Any value can be overridden with a dotted ``section.key=value`` string.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .evaluation.loss import LossConfig
from .geometry import CameraIntrinsics
from .occupancy import MapConfig
from .pipeline import FusionMode, SensorConfigs
from .sensor_models import (
    HoleSynthConfig,
    InverseSensorModelConfig,
    KinectNoiseConfig,
    MeasurementSigmaConfig,
    SurfaceThicknessConfig,
)
from .synthetic import default_intrinsics


@dataclass(frozen=True)
class FusionSettings:
    mode: str = "r+c"
    gate_factor: float = 2.0
    eval_every: int = 10

    def __post_init__(self):
        FusionMode.parse(self.mode)
        if self.gate_factor <= 0:
            raise ValueError("gate_factor must be positive")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")


@dataclass(frozen=True)
class Thresholds:
    recon_free: float = 0.0004
    gt_free: float = 0.03
    iso: float = 0.5

    def __post_init__(self):
        for name in ("recon_free", "gt_free", "iso"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be a probability in (0, 1)")


@dataclass(frozen=True)
class MockSettings:
    noise_scale: float = 3.0
    unc_floor: float = 0.001
    unc_scale: float = 1.0

    def __post_init__(self):
        if self.noise_scale < 0 or self.unc_floor < 0 or self.unc_scale <= 0:
            raise ValueError(f"invalid mock completion settings: {self}")


@dataclass(frozen=True)
class SceneSettings:
    side: float = 5.0
    frames: int = 100
    trajectory: str = "roam"

    def __post_init__(self):
        if self.side <= 0 or self.frames < 1:
            raise ValueError(f"invalid scene settings: {self}")
        if self.trajectory not in ("roam", "walk", "orbit"):
            raise ValueError(f"unknown trajectory {self.trajectory!r}")


@dataclass(frozen=True)
class Seeds:
    degrade: int = 1000
    holes: int = 2000
    complete: int = 3000
    mesh: int = 0


@dataclass(frozen=True)
class EvalSettings:
    delta_convention: str = "ratio"
    mesh_samples: int = 10000

    def __post_init__(self):
        if self.delta_convention not in ("ratio", "relative"):
            raise ValueError(f"unknown delta convention {self.delta_convention!r}")
        if self.mesh_samples < 1:
            raise ValueError("mesh_samples must be positive")


@dataclass(frozen=True)
class Paths:
    sequence: str = ""
    output: str = ""


DESK_CAMERA = default_intrinsics(16, 12)


@dataclass(frozen=True)
class ExperimentConfig:
    map: MapConfig = MapConfig(5.6, 5.6 / 128)
    camera: CameraIntrinsics = DESK_CAMERA
    sigma: MeasurementSigmaConfig = MeasurementSigmaConfig()
    tau: SurfaceThicknessConfig = SurfaceThicknessConfig()
    ism: InverseSensorModelConfig = InverseSensorModelConfig()
    kinect: KinectNoiseConfig = KinectNoiseConfig()
    holes: HoleSynthConfig = HoleSynthConfig(blob_radius_range=(1.0, 2.0))
    loss: LossConfig = LossConfig()
    fusion: FusionSettings = FusionSettings()
    thresholds: Thresholds = Thresholds()
    mock: MockSettings = MockSettings()
    scene: SceneSettings = SceneSettings()
    seeds: Seeds = Seeds()
    evaluation: EvalSettings = EvalSettings()
    paths: Paths = field(default_factory=Paths)

    @property
    def sensors(self) -> SensorConfigs:
        return SensorConfigs(self.sigma, self.tau, self.ism)

    @property
    def mode(self) -> FusionMode:
        return FusionMode.parse(self.fusion.mode)

    def to_dict(self) -> dict:
        return _to_plain(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path):
        Path(path).write_text(self.dumps())

    def override(self, assignments) -> "ExperimentConfig":
        """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
        data = self.to_dict()
        for item in assignments:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValueError(f"override {item!r} is not of the form section.key=value")
            parts = key.strip().split(".")
            node = data
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ValueError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ValueError(f"unknown config key {key!r}")
            node[parts[-1]] = yaml.safe_load(raw)
        return from_dict(data)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"section {where!r} must be a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"unknown key(s) in {where!r}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, f"{where}.{name}" if where else name)
        elif typing.get_origin(hint) is tuple:
            kwargs[name] = tuple(value)
        elif hint is float and isinstance(value, int) and not isinstance(value, bool):
            kwargs[name] = float(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad section {where or 'root'!r}: {exc}") from None


def from_dict(data) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "")


def loads(text: str) -> ExperimentConfig:
    return from_dict(yaml.safe_load(text))


def load(path) -> ExperimentConfig:
    """Read a config file, or a preset when ``path`` names one."""
    if str(path) in PRESETS:
        return PRESETS[str(path)]
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return loads(p.read_text())


PAPER_MAP = MapConfig(15.0, 0.0146)

PRESETS = {
    "desk": ExperimentConfig(),
    "interiornet": ExperimentConfig(
        map=PAPER_MAP,
        camera=CameraIntrinsics(300.0, 300.0, 160.0, 120.0, 320, 240),
        sigma=MeasurementSigmaConfig(0.0016, 0.005, 0.02),
        tau=SurfaceThicknessConfig(0.026, 0.06, 0.16),
        holes=HoleSynthConfig(),
    ),
    "tum": ExperimentConfig(
        map=PAPER_MAP,
        camera=CameraIntrinsics(520.908620, 521.007327, 325.141442, 249.701764, 640, 480),
        sigma=MeasurementSigmaConfig(0.0025, 0.0098, 0.0294),
        tau=SurfaceThicknessConfig(0.05, 0.06, 0.16),
        holes=HoleSynthConfig(),
    ),
}
