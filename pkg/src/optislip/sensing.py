"""Turning speed measurements into (slip, friction) pairs and windows of them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

DEFAULT_WINDOW = 50
DEFAULT_NOISE_SIGMA = 0.005


class SingularSlipError(ValueError):
    """Slip is undefined (or ill-conditioned) at the given vehicle speed."""


class SlipMuPair(NamedTuple):
    lam: float
    mu: float


@dataclass(frozen=True)
class NoiseConfig:
    """Additive white Gaussian noise on the friction channel."""

    sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def invert_measurements(v, omega, omega_prev, Tw, vp, dt, v_stop=1.0) -> SlipMuPair:
    """Recover slip and friction from wheel/vehicle speeds and the braking torque.

    Slip comes from its definition ``1 - r*omega/v``. Friction comes from the
    wheel equation ``J*domega/dt = r*mu*M*g - Tw`` with a backward difference
    for the angular acceleration.

    Parameters
    ----------
    v : vehicle speed [m/s], must exceed ``v_stop``
    omega, omega_prev : wheel speed now and one sample earlier [rad/s]
    Tw : braking torque transmitted over the last sample [N m]
    vp : VehicleParams
    dt : sample time [s]
    """
    if not v > v_stop:
        raise SingularSlipError(f"speed {v} m/s at or below the stop threshold {v_stop}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    lam = min(max(1.0 - vp.radius * omega / v, 0.0), 1.0)
    wheel_accel = (omega - omega_prev) / dt
    mu_hat = (vp.inertia * wheel_accel + Tw) / (vp.radius * vp.mass * vp.gravity)
    return SlipMuPair(lam, mu_hat)


def add_noise(pair: SlipMuPair, cfg: NoiseConfig, rng: np.random.Generator) -> SlipMuPair:
    if cfg.sigma == 0:
        return pair
    return SlipMuPair(pair.lam, pair.mu + cfg.sigma * rng.standard_normal())


class WindowBuffer:
    """FIFO of the last ``capacity`` pairs, flattened as (lam1, mu1, ..., lamP, muP)."""

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._flat = np.zeros(2 * capacity)
        self._count = 0

    def __len__(self):
        return min(self._count, self.capacity)

    @property
    def full(self) -> bool:
        return self._count >= self.capacity

    def push(self, pair: SlipMuPair) -> Optional[np.ndarray]:
        flat = self._flat
        if self._count < self.capacity:
            flat[2 * self._count] = pair[0]
            flat[2 * self._count + 1] = pair[1]
        else:
            flat[:-2] = flat[2:]
            flat[-2] = pair[0]
            flat[-1] = pair[1]
        self._count += 1
        return flat.copy() if self.full else None

    def pairs(self) -> list[SlipMuPair]:
        n = len(self)
        return [SlipMuPair(self._flat[2 * i], self._flat[2 * i + 1]) for i in range(n)]

    def clear(self):
        self._count = 0


def push_and_window(buffer: WindowBuffer, pair: SlipMuPair) -> Optional[np.ndarray]:
    """Append ``pair`` and return the feature window once the buffer is full."""
    return buffer.push(pair)


def window_to_pairs(window) -> list[SlipMuPair]:
    w = np.asarray(window, dtype=float).reshape(-1, 2)
    return [SlipMuPair(float(a), float(b)) for a, b in w]
