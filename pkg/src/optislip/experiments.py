"""Braking scenarios, torque sweeps and the open/closed-loop comparison suites."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .control import PiGains, SmcGains, make_controller
from .friction import FrictionParams, optimal_slip, reference_surface
from .mlp import MlpEstimator, MlpModel
from .rls import RlsEstimator
from .sensing import DEFAULT_WINDOW
from .vehicle import (
    ManeuverConfig,
    ManeuverLog,
    ManeuverTimeout,
    SpeedSchedule,
    SurfaceSchedule,
    VehicleParams,
    WheelLockError,
    run_maneuver,
)

ARROW = "→"
SCENARIO_NAMES = (
    "D", "W", "S",
    "D→S→D", "S→D→S", "W→D→W", "D→W→D", "W→S→W", "S→W→S",
    "S→W→D", "W→D→S", "D→S→W", "S→D→W", "W→S→D", "D→W→S",
)
SUITE_COLUMNS = ("scenario", "estimator", "controller", "rmse", "distance_m", "time_s")
CLOSED_LOOP_TORQUE_FACTOR = 2.0


class ScenarioError(ValueError):
    """Unknown or malformed scenario name."""


class NoFeasibleTorqueError(RuntimeError):
    """Every candidate brake torque locked the wheel or never stopped the vehicle."""


@dataclass(frozen=True)
class Scenario:
    """Surfaces visited in order; the k-th switch happens when the speed first drops to ``thresholds[k]``."""

    name: str
    tags: tuple
    thresholds: tuple = ()

    def __post_init__(self):
        if not 1 <= len(self.tags) <= 3:
            raise ScenarioError(f"{self.name}: need 1 to 3 segments")
        if len(self.thresholds) != len(self.tags) - 1:
            raise ScenarioError(f"{self.name}: need one threshold per transition")

    @property
    def surfaces(self) -> list[FrictionParams]:
        return [reference_surface(t) for t in self.tags]

    def schedule(self):
        if len(self.tags) == 1:
            return SurfaceSchedule.constant(self.surfaces[0])
        return SpeedSchedule(tuple(self.surfaces), tuple(self.thresholds))


def parse_scenario(text: str, v0: float = 80.0) -> Scenario:
    """Accepts ``D→S→W``, ``D->S->W``, ``D-S-W`` or ``DSW``.

    Switches happen at equal fractions of the initial speed, which for three
    segments means 2/3 and 1/3 of ``v0``.
    """
    raw = text.strip().upper()
    parts = [p for p in re.split(r"\s*(?:→|->|-|,)\s*", raw) if p]
    if len(parts) == 1 and len(parts[0]) > 1:
        parts = list(parts[0])
    if not parts or any(p not in ("D", "W", "S") for p in parts):
        raise ScenarioError(f"unknown scenario {text!r}; use surface tags D, W, S such as 'D→S→W'")
    n = len(parts)
    thresholds = tuple(v0 * (n - i) / n for i in range(1, n))
    return Scenario(ARROW.join(parts), tuple(parts), thresholds)


def default_scenarios(v0: float = 80.0) -> list[Scenario]:
    return [parse_scenario(name, v0) for name in SCENARIO_NAMES]


@dataclass(frozen=True)
class Metrics:
    rmse: float
    distance: float
    braking_time: float

    def __post_init__(self):
        for value in (self.rmse, self.distance, self.braking_time):
            if value < 0:
                raise ValueError("metrics must be nonnegative")


def rmse_series(gt, est) -> float:
    gt, est = np.asarray(gt, dtype=float), np.asarray(est, dtype=float)
    if gt.shape != est.shape:
        raise ValueError(f"series lengths differ: {gt.shape} vs {est.shape}")
    if gt.size == 0:
        raise ValueError("cannot compute RMSE of empty series")
    return float(np.sqrt(np.mean((gt - est) ** 2)))


def log_metrics(log: ManeuverLog, estimate=None) -> Metrics:
    est = log.lambda_est if estimate is None else estimate
    return Metrics(rmse_series(log.lambda_gt, est), log.stop_distance, log.stop_time)


def recovery_errors(log: ManeuverLog, estimate=None, window: int = DEFAULT_WINDOW) -> list[float]:
    """Estimation error once ``window`` pairs from the new surface have been collected, per switch.

    The pair measured at a switch step still reflects the old surface, so the
    first fully new window is complete ``window`` steps after the switch.
    """
    est = log.lambda_est if estimate is None else estimate
    out = []
    for s in log.switch_steps:
        k = s + window
        if k < len(log):
            out.append(float(abs(est[k] - log.lambda_gt[k])))
    return out


def ideal_distance(surface: FrictionParams, v0: float = 80.0, gravity: float = 9.81) -> float:
    return v0**2 / (2 * optimal_slip(surface).mu_star * gravity)


# --- brake torque sweep -------------------------------------------------------------


@dataclass
class SweepResult:
    best_torque: float
    torques: np.ndarray
    distances: np.ndarray  # NaN where the wheel locked or the run timed out

    @property
    def best_distance(self) -> float:
        return float(np.nanmin(self.distances))


def _open_loop_distance(surface, tb, vehicle, v0, dt, max_time) -> float:
    if tb <= 0:
        return math.nan
    cfg = ManeuverConfig(
        vehicle, SurfaceSchedule.constant(surface), float(tb), dt=dt, v0=v0,
        measurement_noise_sigma=0.0, max_time=max_time,
    )
    try:
        return run_maneuver(cfg, abort_on_lock=True).stop_distance
    except (WheelLockError, ManeuverTimeout):
        return math.nan


def sweep_brake_torque(surface: FrictionParams, grid: Iterable[float], vehicle: VehicleParams = VehicleParams(),
                       v0: float = 80.0, dt: float = 1e-3, max_time: float = 300.0) -> SweepResult:
    """Open-loop stopping distance for every torque in ``grid``; the best one never locks the wheel."""
    torques = np.asarray(list(grid), dtype=float)
    if torques.size == 0:
        raise ValueError("empty torque grid")
    distances = np.array([_open_loop_distance(surface, tb, vehicle, v0, dt, max_time) for tb in torques])
    if np.all(np.isnan(distances)):
        raise NoFeasibleTorqueError("no torque in the grid stops the vehicle without locking the wheel")
    return SweepResult(float(torques[int(np.nanargmin(distances))]), torques, distances)


def find_brake_torque(surface: FrictionParams, vehicle: VehicleParams = VehicleParams(), levels: int = 4,
                      points: int = 12, v0: float = 80.0, dt: float = 1e-3, max_time: float = 300.0) -> SweepResult:
    """Coarse-to-fine sweep: each level subdivides the interval above the current best torque."""
    upper = 1.4 * vehicle.mass * vehicle.gravity * vehicle.radius
    grid = np.linspace(upper / points, upper, points)
    first = sweep_brake_torque(surface, grid, vehicle, v0, dt, max_time)
    all_t, all_d = [first.torques], [first.distances]
    best, step = first.best_torque, grid[1] - grid[0]
    for _ in range(levels - 1):
        # the optimum sits just below the lock cliff, somewhere in (best, best + step)
        grid = np.linspace(best, best + step, points + 1)[1:]
        d = np.array([_open_loop_distance(surface, tb, vehicle, v0, dt, max_time) for tb in grid])
        all_t.append(grid)
        all_d.append(d)
        if not np.all(np.isnan(d)):
            best = float(grid[int(np.nanargmin(d))])
        step = step / points
    torques, distances = np.concatenate(all_t), np.concatenate(all_d)
    order = np.argsort(torques, kind="stable")
    best = float(torques[int(np.nanargmin(distances))])
    return SweepResult(best, torques[order], distances[order])


# --- suites ------------------------------------------------------------------------


@dataclass
class SuiteRow:
    scenario: str
    estimator: str
    controller: str
    rmse: float = math.nan
    distance_m: float = math.nan
    time_s: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class SuiteResult:
    rows: list = field(default_factory=list)
    recovery: dict = field(default_factory=dict)  # (scenario, estimator, controller) -> errors per switch

    def row(self, scenario: str, estimator: str, controller: str = "none") -> SuiteRow:
        for r in self.rows:
            if (r.scenario, r.estimator, r.controller) == (scenario, estimator, controller):
                return r
        raise KeyError((scenario, estimator, controller))


@dataclass(frozen=True)
class SuiteSettings:
    vehicle: VehicleParams = VehicleParams()
    v0: float = 80.0
    v_stop: float = 1.0
    dt: float = 1e-3
    noise_sigma: float = 0.005
    seed: int = 0
    max_time: float = 300.0
    hold: float = 0.10
    rls_forgetting: float = 0.995
    rls_scale: float = 1e3
    rls_trace_cap: Optional[float] = 1e4
    smc: SmcGains = SmcGains()
    pi: PiGains = PiGains()
    closed_loop_factor: float = CLOSED_LOOP_TORQUE_FACTOR

    def config(self, scenario: Scenario, tb: float) -> ManeuverConfig:
        return ManeuverConfig(
            self.vehicle, scenario.schedule(), tb, dt=self.dt, v0=self.v0, v_stop=self.v_stop,
            measurement_noise_sigma=self.noise_sigma, seed=self.seed, max_time=self.max_time,
        )

    def mlp(self, model: MlpModel) -> MlpEstimator:
        return MlpEstimator(model, hold=self.hold)

    def rls(self) -> RlsEstimator:
        return RlsEstimator(forgetting=self.rls_forgetting, scale=self.rls_scale,
                            trace_cap=self.rls_trace_cap, hold=self.hold)


def swept_torques(tags: Iterable[str], settings: SuiteSettings = SuiteSettings(), cache: Optional[dict] = None) -> dict:
    """Best open-loop torque per initial surface tag, memoized in ``cache``."""
    cache = {} if cache is None else cache
    for tag in tags:
        if tag not in cache:
            cache[tag] = find_brake_torque(
                reference_surface(tag), settings.vehicle, v0=settings.v0, dt=settings.dt,
                max_time=settings.max_time,
            ).best_torque
    return cache


LogHook = Callable[[tuple, ManeuverLog], None]


def run_open_loop_suite(scenarios: list[Scenario], model: MlpModel, torques: dict,
                        settings: SuiteSettings = SuiteSettings(), on_log: Optional[LogHook] = None) -> SuiteResult:
    """Pilot torque applied directly; both estimators read the same measurement stream."""
    result = SuiteResult()
    window = model.dims[0] // 2
    for sc in scenarios:
        try:
            log = run_maneuver(
                settings.config(sc, torques[sc.tags[0]]),
                estimator=settings.mlp(model), observers={"RLS": settings.rls()},
            )
        except Exception as exc:  # noqa: BLE001 - a failed scenario must not stop the suite
            for name in ("MLP", "RLS"):
                result.rows.append(SuiteRow(sc.name, name, "none", error=f"{type(exc).__name__}: {exc}"))
            continue
        for name, est in (("MLP", log.lambda_est), ("RLS", log.observers["RLS"])):
            m = log_metrics(log, est)
            result.rows.append(SuiteRow(sc.name, name, "none", m.rmse, m.distance, m.braking_time))
            result.recovery[(sc.name, name, "none")] = recovery_errors(log, est, window)
        if on_log is not None:
            on_log((sc.name, "both", "none"), log)
    return result


def run_closed_loop_suite(scenarios: list[Scenario], model: MlpModel, torques: dict,
                          settings: SuiteSettings = SuiteSettings(), estimators=("MLP", "RLS"),
                          controllers=("PI", "SMC"), on_log: Optional[LogHook] = None) -> SuiteResult:
    """Every scenario under every estimator/controller pair, with ``Tb = factor * swept torque``."""
    result = SuiteResult()
    for sc in scenarios:
        tb = settings.closed_loop_factor * torques[sc.tags[0]]
        for est_name in estimators:
            for ctl_name in controllers:
                key = (sc.name, est_name, ctl_name)
                est = settings.mlp(model) if est_name == "MLP" else settings.rls()
                ctl = make_controller(ctl_name, settings.smc, settings.pi)
                try:
                    log = run_maneuver(settings.config(sc, tb), controller=ctl, estimator=est)
                except Exception as exc:  # noqa: BLE001
                    result.rows.append(SuiteRow(*key, error=f"{type(exc).__name__}: {exc}"))
                    continue
                m = log_metrics(log)
                result.rows.append(SuiteRow(*key, m.rmse, m.distance, m.braking_time))
                result.recovery[key] = recovery_errors(log, window=est.window if est_name == "MLP" else DEFAULT_WINDOW)
                if on_log is not None:
                    on_log(key, log)
    return result


def _cell(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def write_suite_csv(result: SuiteResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUITE_COLUMNS)
        for r in result.rows:
            writer.writerow([r.scenario, r.estimator, r.controller, _cell(r.rmse), _cell(r.distance_m), _cell(r.time_s)])


# --- acceptance bands -----------------------------------------------------------------


@dataclass
class BandCheck:
    name: str
    passed: bool
    detail: str


CLOSED_LOOP_TARGETS = {"D": (280.516, 0.03), "W": (405.912, 0.03), "S": (1740.0, 0.05)}


def check_bands(open_loop: Optional[SuiteResult], closed_loop: Optional[SuiteResult],
                settings: SuiteSettings = SuiteSettings()) -> list[BandCheck]:
    checks = []
    if open_loop is not None:
        for tag in ("D", "W"):
            try:
                r = open_loop.row(tag, "MLP")
            except KeyError:
                continue
            checks.append(BandCheck(f"open-loop {tag} MLP rmse <= 0.05", r.ok and r.rmse <= 0.05, f"{r.rmse:.4f}"))
        names = sorted({r.scenario for r in open_loop.rows})
        wins = 0
        for name in names:
            a, b = open_loop.row(name, "MLP"), open_loop.row(name, "RLS")
            wins += int(a.ok and b.ok and a.rmse < b.rmse)
        if len(names) == len(SCENARIO_NAMES):
            checks.append(BandCheck("open-loop MLP beats RLS in >= 10 of 15", wins >= 10, f"{wins} of {len(names)}"))
        worst = max((e for k, errs in open_loop.recovery.items() if k[1] == "MLP" for e in errs), default=None)
        if worst is not None:
            checks.append(BandCheck("open-loop MLP recovery within P updates < 0.03", worst < 0.03, f"worst {worst:.4f}"))
    if closed_loop is not None:
        for tag, (target, tol) in CLOSED_LOOP_TARGETS.items():
            try:
                r = closed_loop.row(tag, "MLP", "SMC")
            except KeyError:
                continue
            ok = r.ok and abs(r.distance_m / target - 1) <= tol
            checks.append(BandCheck(f"closed-loop {tag} MLP/SMC distance within {tol:.0%} of {target}", ok, f"{r.distance_m:.2f} m"))
        below = []
        for r in closed_loop.rows:
            if not r.ok:
                below.append(f"{r.scenario}/{r.estimator}/{r.controller} failed")
                continue
            best = max(optimal_slip(reference_surface(t)).mu_star for t in parse_scenario(r.scenario).tags)
            bound = settings.v0**2 / (2 * best * settings.vehicle.gravity) - 0.5
            if r.distance_m < bound:
                below.append(f"{r.scenario}/{r.estimator}/{r.controller}")
        checks.append(BandCheck("closed-loop distances respect the physics bound", not below, ", ".join(below) or "all"))
    return checks
