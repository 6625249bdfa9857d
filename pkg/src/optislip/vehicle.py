"""Quarter-car braking model, fixed-step integration and maneuver execution."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .friction import FrictionParams, mu, mu_unchecked, optimal_slip
from .sensing import NoiseConfig, SingularSlipError, SlipMuPair, add_noise, invert_measurements

SETPOINT_BOUNDS = (0.01, 0.99)
LOG_COLUMNS = ("t", "v", "omega", "x", "lambda", "mu_true", "lambda_gt", "lambda_est", "u", "Tw")


class WheelLockError(RuntimeError):
    """Raised by :func:`run_maneuver` with ``abort_on_lock`` once the wheel locks."""


class ManeuverTimeout(RuntimeError):
    """The vehicle did not slow below the stop speed within the allowed time."""


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1600.0  # kg
    inertia: float = 0.45  # kg m^2
    radius: float = 0.3  # m
    gravity: float = 9.81  # m/s^2

    def __post_init__(self):
        if min(self.mass, self.inertia, self.radius, self.gravity) <= 0:
            raise ValueError("vehicle parameters must be strictly positive")


@dataclass(frozen=True)
class SimState:
    t: float
    v: float
    omega: float
    x: float = 0.0


@dataclass(frozen=True)
class SurfaceSchedule:
    """Piecewise-constant surface as a function of time.

    ``segments`` is a sequence of ``(start_time, FrictionParams)``.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(t0), p) for t0, p in self.segments)
        if not segs or segs[0][0] != 0.0:
            raise ValueError("first segment must start at t = 0")
        if any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise ValueError("segment start times must be strictly increasing")
        object.__setattr__(self, "segments", segs)

    @property
    def surfaces(self) -> list[FrictionParams]:
        return [p for _, p in self.segments]

    def surface_index(self, t: float, v: float, current: int) -> int:
        i = current
        while i + 1 < len(self.segments) and self.segments[i + 1][0] <= t:
            i += 1
        return i

    @classmethod
    def constant(cls, params: FrictionParams) -> "SurfaceSchedule":
        return cls(((0.0, params),))


@dataclass(frozen=True)
class SpeedSchedule:
    """Surface switches latched when the vehicle speed first drops to each threshold.

    ``thresholds`` are in m/s and strictly decreasing; there is one more
    surface than thresholds.
    """

    surfaces: tuple
    thresholds: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        if len(self.surfaces) != len(self.thresholds) + 1:
            raise ValueError("need exactly one more surface than speed thresholds")
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("speed thresholds must be strictly decreasing")

    def surface_index(self, t: float, v: float, current: int) -> int:
        i = current
        while i < len(self.thresholds) and v <= self.thresholds[i]:
            i += 1
        return i


@dataclass
class ManeuverConfig:
    vehicle: VehicleParams
    schedule: object  # SurfaceSchedule or SpeedSchedule
    brake_torque: float  # pilot request Tb [N m]
    dt: float = 1e-3
    v0: float = 80.0
    v_stop: float = 1.0
    measurement_noise_sigma: float = 0.005
    seed: int = 0
    max_time: float = 300.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.v_stop < self.v0:
            raise ValueError("need 0 < v_stop < v0")
        if not self.measurement_noise_sigma >= 0:
            raise ValueError("noise sigma must be >= 0")
        if self.brake_torque < 0:
            raise ValueError("brake torque must be >= 0")


@dataclass
class ManeuverLog:
    t: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    mu_true: np.ndarray
    lambda_gt: np.ndarray
    lambda_est: np.ndarray
    u: np.ndarray
    Tw: np.ndarray
    mu_meas: np.ndarray  # NaN at the first step, before any measurement exists
    surface_index: np.ndarray
    stop_time: float
    stop_distance: float
    observers: dict = field(default_factory=dict)
    dt: float = 1e-3
    surfaces: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def surface_at(self, k: int) -> FrictionParams:
        return self.surfaces[self.surface_index[k]]

    @property
    def switch_steps(self) -> list[int]:
        """Step indices at which a new surface becomes active."""
        return [int(k) for k in np.flatnonzero(np.diff(self.surface_index)) + 1]

    def columns(self) -> dict:
        return {
            "t": self.t, "v": self.v, "omega": self.omega, "x": self.x,
            "lambda": self.lam, "mu_true": self.mu_true, "lambda_gt": self.lambda_gt,
            "lambda_est": self.lambda_est, "u": self.u, "Tw": self.Tw,
        }

    def to_csv(self, path, decimate: int = 1):
        if decimate < 1:
            raise ValueError("decimation factor must be >= 1")
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_COLUMNS)
            for k in range(0, len(self.t), decimate):
                writer.writerow([_fmt(cols[name][k]) for name in LOG_COLUMNS])


def _fmt(value) -> str:
    return "" if math.isnan(value) else repr(float(value))


def slip_from_speeds(v: float, omega: float, r: float) -> float:
    """Longitudinal braking slip ``1 - r*omega/v``, clamped to [0, 1]."""
    if not v > 0:
        raise SingularSlipError(f"slip undefined at vehicle speed {v}")
    return min(max(1.0 - r * omega / v, 0.0), 1.0)


def qcm_derivatives(state: SimState, vp: VehicleParams, surface: FrictionParams, Tw: float):
    """Accelerations ``(dv/dt, domega/dt)`` of the quarter-car model."""
    lam = slip_from_speeds(state.v, state.omega, vp.radius)
    Fx = mu(surface, lam) * vp.mass * vp.gravity
    return -Fx / vp.mass, (vp.radius * Fx - Tw) / vp.inertia


def slip_dynamics_rhs(lam, v, vp: VehicleParams, surface: FrictionParams, Tw):
    """Slip rate obtained by using slip as the state in place of wheel speed."""
    if not v > 0:
        raise SingularSlipError(f"slip dynamics singular at vehicle speed {v}")
    ratio = vp.mass * vp.radius**2 / vp.inertia
    return (
        -((1.0 - lam) + ratio) * vp.gravity * mu(surface, lam) / v
        + vp.radius * Tw / (vp.inertia * v)
    )


def _substeps(v, vp, surface, dt):
    # The wheel mode has eigenvalue ~ -(M r^2 g / (J v)) * dmu/dlam, which grows
    # without bound as v -> 0; keep h * |eig| <= 2 inside the RK4 stability region.
    if v <= 0:
        return 1
    stiffness = vp.mass * vp.radius**2 * vp.gravity * surface.beta1 * surface.beta2 / (vp.inertia * v)
    return max(1, math.ceil(dt * stiffness / 2.0))


def _integrate(v, w, x, Tw, dt, vp, surface):
    """Advance (v, omega, x) by ``dt``; returns the new state and the torque
    actually transmitted by the brake (lower than ``Tw`` while the wheel is locked)."""
    M, J, r, g = vp.mass, vp.inertia, vp.radius, vp.gravity
    b1, b2, b3 = surface.beta1, surface.beta2, surface.beta3
    Mg = M * g

    def rhs(v, w):
        if v <= 0.0:
            return 0.0, 0.0
        lam = 1.0 - r * w / v
        lam = 0.0 if lam < 0.0 else (1.0 if lam > 1.0 else lam)
        F = Mg * mu_unchecked(b1, b2, b3, lam)
        return -F / M, (r * F - Tw) / J

    n = _substeps(v, vp, surface, dt)
    h = dt / n
    lock_impulse = 0.0
    for _ in range(n):
        a1, c1 = rhs(v, w)
        a2, c2 = rhs(v + 0.5 * h * a1, w + 0.5 * h * c1)
        a3, c3 = rhs(v + 0.5 * h * a2, w + 0.5 * h * c2)
        a4, c4 = rhs(v + h * a3, w + h * c3)
        x += h / 6.0 * (v + 2.0 * (v + 0.5 * h * a1) + 2.0 * (v + 0.5 * h * a2) + (v + h * a3))
        v += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        w += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if w < 0.0:
            lock_impulse -= J * w
            w = 0.0
        if v < 0.0:
            v = 0.0
    return v, w, x, Tw - lock_impulse / dt


def step(state: SimState, vp: VehicleParams, surface: FrictionParams, Tw: float, dt: float) -> SimState:
    """One classical RK4 step of the quarter-car model.

    The wheel speed is clamped at zero (locked wheel) and the vehicle speed
    at zero; at low speed the step is split into equal RK4 sub-steps to stay
    inside the stability region.
    """
    if Tw < 0:
        raise ValueError("braking torque must be >= 0")
    v, w, x, _ = _integrate(state.v, state.omega, state.x, Tw, dt, vp, surface)
    return SimState(state.t + dt, v, w, x)


def transmitted_step(state: SimState, vp, surface, Tw, dt):
    """Like :func:`step` but also returns the mean brake torque actually transmitted."""
    v, w, x, tw_eff = _integrate(state.v, state.omega, state.x, Tw, dt, vp, surface)
    return SimState(state.t + dt, v, w, x), tw_eff


def run_maneuver(
    config: ManeuverConfig,
    controller=None,
    estimator=None,
    observers: Optional[dict] = None,
    abort_on_lock: bool = False,
) -> ManeuverLog:
    """Brake from ``v0`` until the speed drops to ``v_stop``.

    Without a controller the pilot request is applied directly (open loop).
    With a controller the applied torque is ``Tb * u`` and the set-point is
    the estimator output, or the true optimal slip of the active surface when
    no estimator is given. ``observers`` are extra estimators fed the same
    measurement stream; their outputs go to ``log.observers``.
    With ``abort_on_lock`` the run stops with :class:`WheelLockError` as soon
    as the wheel speed hits zero above ``v_stop``.
    """
    vp = config.vehicle
    schedule = config.schedule
    dt = config.dt
    Tb = config.brake_torque
    surfaces = list(schedule.surfaces)
    gt = [optimal_slip(p).lambda_star for p in surfaces]
    observers = dict(observers or {})
    noise = NoiseConfig(config.measurement_noise_sigma, config.seed)
    rng = noise.rng()
    for est in [estimator, *observers.values()]:
        if est is not None:
            est.reset()
    if controller is not None:
        controller.reset()

    max_steps = int(math.ceil(config.max_time / dt))
    rec = {name: [] for name in LOG_COLUMNS}
    mu_meas, surf_idx = [], []
    obs_rec = {name: [] for name in observers}

    v, w, x = config.v0, config.v0 / vp.radius, 0.0
    idx = schedule.surface_index(0.0, v, 0)
    w_prev = None
    tw_prev = 0.0
    lo, hi = SETPOINT_BOUNDS
    k = 0
    while True:
        t = k * dt
        idx = schedule.surface_index(t, v, idx)
        surface = surfaces[idx]
        lam = slip_from_speeds(v, w, vp.radius)

        est = math.nan
        meas = math.nan
        if w_prev is not None:
            pair = invert_measurements(v, w, w_prev, tw_prev, vp, dt, config.v_stop)
            pair = add_noise(pair, noise, rng)
            meas = pair.mu
            if estimator is not None:
                est = estimator.update(pair)
            for name, ob in observers.items():
                obs_rec[name].append(ob.update(pair))
        else:
            if estimator is not None:
                est = estimator.hold
            for name, ob in observers.items():
                obs_rec[name].append(ob.hold)

        if controller is None:
            u = 1.0
        else:
            ref = gt[idx] if estimator is None else min(max(est, lo), hi)
            u = controller.step(ref, lam, dt)
        Tw = Tb * u

        rec["t"].append(t)
        rec["v"].append(v)
        rec["omega"].append(w)
        rec["x"].append(x)
        rec["lambda"].append(lam)
        rec["mu_true"].append(mu_unchecked(surface.beta1, surface.beta2, surface.beta3, lam))
        rec["lambda_gt"].append(gt[idx])
        rec["lambda_est"].append(est)
        rec["u"].append(u)
        mu_meas.append(meas)
        surf_idx.append(idx)

        v_new, w_new, x_new, tw_eff = _integrate(v, w, x, Tw, dt, vp, surface)
        rec["Tw"].append(tw_eff)
        k += 1
        if v_new <= config.v_stop:
            frac = (v - config.v_stop) / (v - v_new) if v > v_new else 1.0
            stop_time = (k - 1 + frac) * dt
            stop_distance = x + frac * (x_new - x)
            break
        if abort_on_lock and w_new == 0.0:
            raise WheelLockError(f"wheel locked at t={k * dt:.3f} s, v={v_new:.2f} m/s")
        if k >= max_steps:
            raise ManeuverTimeout(
                f"speed still {v_new:.2f} m/s after {config.max_time:.0f} s of braking"
            )
        w_prev, tw_prev = w, tw_eff
        v, w, x = v_new, w_new, x_new

    arr = {name: np.asarray(vals, dtype=float) for name, vals in rec.items()}
    return ManeuverLog(
        t=arr["t"], v=arr["v"], omega=arr["omega"], x=arr["x"], lam=arr["lambda"],
        mu_true=arr["mu_true"], lambda_gt=arr["lambda_gt"], lambda_est=arr["lambda_est"],
        u=arr["u"], Tw=arr["Tw"], mu_meas=np.asarray(mu_meas, dtype=float),
        surface_index=np.asarray(surf_idx, dtype=int),
        stop_time=stop_time, stop_distance=stop_distance,
        observers={name: np.asarray(vals, dtype=float) for name, vals in obs_rec.items()},
        dt=dt,
        surfaces=surfaces,
    )
