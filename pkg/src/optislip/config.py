"""Run configuration: JSON file plus command-line overrides, resolved once and saved with the outputs."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .control import PiGains, SmcGains
from .dataset import FrictionCube
from .experiments import SCENARIO_NAMES, SuiteSettings
from .mlp import TrainConfig
from .sensing import NoiseConfig
from .vehicle import VehicleParams


class ConfigError(ValueError):
    """Unknown key or invalid value in a run configuration."""


@dataclass
class DatasetSection:
    b1_range: list = field(default_factory=lambda: [0.15, 1.35])
    b2_range: list = field(default_factory=lambda: [20.0, 100.0])
    b3_range: list = field(default_factory=lambda: [0.05, 0.55])
    n_diag: int = 50
    n_hyp: int = 150
    window: int = 50
    stride: int = 1
    noise_sigma: float = 0.005
    n_points: int = 1000
    split_ratios: list = field(default_factory=lambda: [0.7, 0.15, 0.15])


@dataclass
class TrainSection:
    learning_rate: float = 0.01
    epochs: int = 40
    batch_size: int = 32
    shuffle: bool = True
    hidden: list = field(default_factory=lambda: [250, 250])


@dataclass
class VehicleSection:
    mass: float = 1600.0
    inertia: float = 0.45
    radius: float = 0.3
    gravity: float = 9.81


@dataclass
class ManeuverSection:
    v0: float = 80.0
    v_stop: float = 1.0
    dt: float = 1e-3
    noise_sigma: float = 0.005
    max_time: float = 300.0
    hold: float = 0.10
    closed_loop_factor: float = 2.0


@dataclass
class RlsSection:
    forgetting: float = 0.995
    scale: float = 1e3
    trace_cap: Optional[float] = 1e4


@dataclass
class SmcSection:
    beta_gain: float = 0.5
    k0: float = 5.0
    epsilon: float = 0.5


@dataclass
class PiSection:
    kp: float = 1.0
    ki: float = 15.0


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs"
    dataset: DatasetSection = field(default_factory=DatasetSection)
    train: TrainSection = field(default_factory=TrainSection)
    vehicle: VehicleSection = field(default_factory=VehicleSection)
    maneuver: ManeuverSection = field(default_factory=ManeuverSection)
    rls: RlsSection = field(default_factory=RlsSection)
    smc: SmcSection = field(default_factory=SmcSection)
    pi: PiSection = field(default_factory=PiSection)
    scenarios: list = field(default_factory=lambda: list(SCENARIO_NAMES))

    # --- conversions to library objects ---

    def cube(self) -> FrictionCube:
        d = self.dataset
        return FrictionCube(tuple(d.b1_range), tuple(d.b2_range), tuple(d.b3_range))

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.dataset.noise_sigma, self.seed)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(t.learning_rate, t.epochs, t.batch_size, self.seed, t.shuffle)

    def model_dims(self) -> tuple:
        return (2 * self.dataset.window, *self.train.hidden, 1)

    def vehicle_params(self) -> VehicleParams:
        return VehicleParams(**asdict(self.vehicle))

    def suite_settings(self) -> SuiteSettings:
        m = self.maneuver
        return SuiteSettings(
            vehicle=self.vehicle_params(), v0=m.v0, v_stop=m.v_stop, dt=m.dt, noise_sigma=m.noise_sigma,
            seed=self.seed, max_time=m.max_time, hold=m.hold,
            rls_forgetting=self.rls.forgetting, rls_scale=self.rls.scale, rls_trace_cap=self.rls.trace_cap,
            smc=SmcGains(**asdict(self.smc)), pi=PiGains(**asdict(self.pi)),
            closed_loop_factor=m.closed_loop_factor,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def validate(self) -> "RunConfig":
        """Build every derived object once so bad values surface before any work starts."""
        if self.train.learning_rate < 0:
            raise ConfigError("learning rate must be >= 0")
        try:
            self.cube()
            self.noise()
            if self.train.learning_rate > 0:
                self.train_config()
            self.suite_settings()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.dataset.window < 1 or self.dataset.stride < 1:
            raise ConfigError("window and stride must be >= 1")
        return self


def _merge(obj, updates: dict, where: str):
    if not isinstance(updates, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in updates.items():
        if key not in names:
            raise ConfigError(f"unknown config key {where + key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(obj, key, value)
    return obj


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then ``overrides`` (dotted keys allowed)."""
    cfg = RunConfig()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        _merge(cfg, doc, "")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        nested = {leaf: value}
        for p in reversed(parents):
            nested = {p: nested}
        _merge(cfg, nested, "")
    return cfg.validate()
