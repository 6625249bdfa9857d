"""Recursive least squares on a linearly parametrized friction curve, plus argmax extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sensing import SlipMuPair
from .vehicle import SETPOINT_BOUNDS

DEFAULT_SHAPES = (10.0, 30.0, 90.0)
DEFAULT_FORGETTING = 0.995
DEFAULT_SCALE = 1e3
GRID = np.linspace(0.0, 1.0, 1000)


@dataclass(frozen=True)
class RlsBasis:
    """``phi(lam) = [1 - exp(-a_i lam) for a_i in shapes] + [lam]``."""

    shapes: tuple = DEFAULT_SHAPES

    def __post_init__(self):
        if len(set(self.shapes)) != len(self.shapes) or min(self.shapes) <= 0:
            raise ValueError("shape constants must be distinct and positive")

    @property
    def size(self) -> int:
        return len(self.shapes) + 1

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        cols = [1.0 - np.exp(-a * lam) for a in self.shapes] + [lam]
        return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class RlsState:
    theta: np.ndarray
    covariance: np.ndarray
    forgetting: float = DEFAULT_FORGETTING
    basis: RlsBasis = RlsBasis()
    updates: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "theta": self.theta.tolist(),
            "covariance": self.covariance.tolist(),
            "forgetting": self.forgetting,
            "shapes": list(self.basis.shapes),
            "updates": self.updates,
        })


def rls_init(basis: RlsBasis = RlsBasis(), initial_covariance_scale: float = DEFAULT_SCALE,
             forgetting: float = DEFAULT_FORGETTING) -> RlsState:
    if not initial_covariance_scale > 0:
        raise ValueError("initial covariance scale must be positive")
    if not 0 < forgetting <= 1:
        raise ValueError("forgetting factor must lie in (0, 1]")
    m = basis.size
    return RlsState(np.zeros(m), initial_covariance_scale * np.eye(m), forgetting, basis)


def rls_update(state: RlsState, pair: SlipMuPair, trace_cap: float | None = None) -> RlsState:
    """One exponentially weighted RLS step.

    ``trace_cap`` optionally rescales the covariance whenever its trace exceeds
    the cap, which bounds windup when the regressor stops exciting all directions.
    """
    lam, mu_obs = pair
    phi = state.basis(lam)
    P = state.covariance
    Pphi = P @ phi
    k = Pphi / (state.forgetting + phi @ Pphi)
    theta = state.theta + k * (mu_obs - phi @ state.theta)
    P = (P - np.outer(k, Pphi)) / state.forgetting
    P = 0.5 * (P + P.T)
    if trace_cap is not None:
        tr = np.trace(P)
        if tr > trace_cap:
            P = P * (trace_cap / tr)
    return RlsState(theta, P, state.forgetting, state.basis, state.updates + 1)


class SlipEstimate(NamedTuple):
    lambda_star: float
    identified: bool


def fitted_curve(state: RlsState, lam=GRID) -> np.ndarray:
    return state.basis(lam) @ state.theta


def rls_optimal_slip(state: RlsState, bounds=SETPOINT_BOUNDS) -> SlipEstimate:
    """Grid argmax of the fitted curve, clamped to ``bounds``; all-zero theta is flagged unidentified."""
    if not np.any(state.theta):
        return SlipEstimate(bounds[0], False)
    lam = GRID[int(np.argmax(fitted_curve(state)))]
    return SlipEstimate(float(np.clip(lam, *bounds)), True)


class RlsEstimator:
    """Online RLS baseline with the same interface as the network estimator."""

    name = "RLS"

    def __init__(self, basis: RlsBasis = RlsBasis(), forgetting: float = DEFAULT_FORGETTING,
                 scale: float = DEFAULT_SCALE, trace_cap: float | None = None,
                 hold: float = 0.10, bounds=SETPOINT_BOUNDS):
        self.basis, self.forgetting, self.scale = basis, forgetting, scale
        self.trace_cap, self.hold, self.bounds = trace_cap, hold, bounds
        self._grid_basis = basis(GRID)
        self.reset()

    def reset(self):
        self.state = rls_init(self.basis, self.scale, self.forgetting)
        self.estimate = self.hold

    def update(self, pair: SlipMuPair) -> float:
        self.state = rls_update(self.state, pair, self.trace_cap)
        if self.state.updates >= self.basis.size and np.any(self.state.theta):
            lam = GRID[int(np.argmax(self._grid_basis @ self.state.theta))]
            self.estimate = float(np.clip(lam, *self.bounds))
        return self.estimate
