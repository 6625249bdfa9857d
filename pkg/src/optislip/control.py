"""Slip regulators scaling the pilot brake request, ``Tw = Tb * u`` with ``u`` in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass


def sat(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


def _clip01(u: float) -> float:
    return 0.0 if u < 0.0 else (1.0 if u > 1.0 else u)


@dataclass(frozen=True)
class SmcGains:
    beta_gain: float = 0.5
    k0: float = 5.0  # 1/s
    epsilon: float = 0.5

    def __post_init__(self):
        if not 0 < self.beta_gain <= 0.5:
            raise ValueError("beta_gain must lie in (0, 0.5]")
        if not (self.k0 > 0 and self.epsilon > 0):
            raise ValueError("k0 and epsilon must be positive")


@dataclass(frozen=True)
class SmcState:
    sigma: float = 0.0


def smc_step(state: SmcState, lambda_ref: float, lam: float, gains: SmcGains, dt: float):
    """Integral sliding-mode law with a saturated switching term.

    ``u = 1/2 - beta * sat((e + k0*sigma) / eps)`` and
    ``dsigma/dt = -k0*sigma + eps * sat((e + k0*sigma) / eps)``, integrated with
    one explicit Euler step. The slip error is taken as ``lam - lambda_ref``
    so that excess slip releases the brake under the positive braking-slip
    convention used throughout this package.

    Returns
    -------
    (u, SmcState)
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = lam - lambda_ref
    s = e + gains.k0 * state.sigma
    switch = sat(s / gains.epsilon)
    u = _clip01(0.5 - gains.beta_gain * switch)
    sigma = state.sigma + dt * (-gains.k0 * state.sigma + gains.epsilon * switch)
    return u, SmcState(sigma)


@dataclass(frozen=True)
class PiGains:
    kp: float = 1.0
    ki: float = 15.0  # 1/s

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("PI gains must be non-negative")


@dataclass(frozen=True)
class PiState:
    integral: float = 0.0


def pi_step(state: PiState, lambda_ref: float, lam: float, gains: PiGains, dt: float):
    """``u = 0.5 + kp*e + ki*int(e)`` with ``e = lambda_ref - lam``.

    The integral is frozen whenever the output saturates (anti-windup).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = lambda_ref - lam
    held = 0.5 + gains.kp * e + gains.ki * state.integral
    if (held >= 1.0 and e > 0) or (held <= 0.0 and e < 0):
        integral = state.integral
    else:
        integral = state.integral + e * dt
    raw = 0.5 + gains.kp * e + gains.ki * integral
    return _clip01(raw), PiState(integral)


class SlidingModeController:
    """Stateful wrapper around :func:`smc_step` for the simulator loop."""

    name = "SMC"

    def __init__(self, gains: SmcGains = SmcGains()):
        self.gains = gains
        self.state = SmcState()

    def reset(self):
        self.state = SmcState()

    def step(self, lambda_ref, lam, dt):
        u, self.state = smc_step(self.state, lambda_ref, lam, self.gains, dt)
        return u


class PIController:
    name = "PI"

    def __init__(self, gains: PiGains = PiGains()):
        self.gains = gains
        self.state = PiState()

    def reset(self):
        self.state = PiState()

    def step(self, lambda_ref, lam, dt):
        u, self.state = pi_step(self.state, lambda_ref, lam, self.gains, dt)
        return u


def make_controller(name: str, smc: SmcGains = SmcGains(), pi: PiGains = PiGains()):
    key = name.upper()
    if key == "SMC":
        return SlidingModeController(smc)
    if key == "PI":
        return PIController(pi)
    if key in ("NONE", ""):
        return None
    raise ValueError(f"unknown controller {name!r}")

