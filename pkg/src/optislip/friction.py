"""Burckhardt tire-road friction curves and their optimal slip."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


class InvalidSurfaceError(ValueError):
    """Raised when a parameter triple does not describe a peaked friction curve."""


@dataclass(frozen=True)
class FrictionParams:
    """Burckhardt triple for one road surface.

    Parameters
    ----------
    beta1 : friction magnitude
    beta2 : shape factor, in 1/slip
    beta3 : linear decay coefficient
    """

    beta1: float
    beta2: float
    beta3: float

    def __post_init__(self):
        if not (self.beta1 > 0 and self.beta2 > 0 and self.beta3 > 0):
            raise InvalidSurfaceError(f"non-positive Burckhardt parameter in {self}")
        if not self.beta1 * self.beta2 > self.beta3:
            raise InvalidSurfaceError(f"no interior friction peak for {self}")
        lam = closed_form_slip(self.beta1, self.beta2, self.beta3)
        if not 0.0 < lam < 1.0:
            raise InvalidSurfaceError(f"optimal slip {lam:.4f} outside (0, 1) for {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.beta1, self.beta2, self.beta3)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "FrictionParams":
        data = json.loads(text)
        return cls(float(data["beta1"]), float(data["beta2"]), float(data["beta3"]))


@dataclass(frozen=True)
class OptimalPoint:
    lambda_star: float
    mu_star: float


def is_valid_triple(beta1: float, beta2: float, beta3: float) -> bool:
    """True when the triple yields a positive initial slope and a peak inside (0, 1)."""
    if not (beta1 > 0 and beta2 > 0 and beta3 > 0 and beta1 * beta2 > beta3):
        return False
    return 0.0 < closed_form_slip(beta1, beta2, beta3) < 1.0


def closed_form_slip(beta1: float, beta2: float, beta3: float) -> float:
    return math.log(beta1 * beta2 / beta3) / beta2


def _check_slip(lam):
    arr = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"slip must lie in [0, 1], got {lam!r}")


def mu(params: FrictionParams, lam):
    """Friction coefficient ``beta1 * (1 - exp(-beta2 * lam)) - beta3 * lam``.

    Accepts a scalar or an array of slips in [0, 1].
    """
    _check_slip(lam)
    b1, b2, b3 = params.beta1, params.beta2, params.beta3
    if np.ndim(lam) == 0:
        lam = float(lam)
        return b1 * (1.0 - math.exp(-b2 * lam)) - b3 * lam
    lam = np.asarray(lam, dtype=float)
    return b1 * (1.0 - np.exp(-b2 * lam)) - b3 * lam


def mu_unchecked(b1: float, b2: float, b3: float, lam: float) -> float:
    # hot path for the integrator; caller guarantees lam in [0, 1]
    return b1 * (1.0 - math.exp(-b2 * lam)) - b3 * lam


def mu_slope(params: FrictionParams, lam):
    """Derivative of :func:`mu` with respect to slip."""
    _check_slip(lam)
    b1, b2, b3 = params.beta1, params.beta2, params.beta3
    if np.ndim(lam) == 0:
        return b1 * b2 * math.exp(-b2 * float(lam)) - b3
    return b1 * b2 * np.exp(-b2 * np.asarray(lam, dtype=float)) - b3


def optimal_slip(params: FrictionParams) -> OptimalPoint:
    """Peak of the friction curve.

    The maximum is where ``mu_slope`` vanishes, ``lambda* = ln(b1 b2 / b3) / b2``.
    """
    lam = closed_form_slip(params.beta1, params.beta2, params.beta3)
    if not 0.0 < lam < 1.0:
        raise InvalidSurfaceError(f"optimal slip {lam:.4f} outside (0, 1)")
    return OptimalPoint(lam, mu(params, lam))


def grid_optimal_slip(params: FrictionParams, n: int = 1000) -> OptimalPoint:
    """Brute-force argmax of the friction curve on a uniform slip grid."""
    grid = np.linspace(0.0, 1.0, n)
    values = mu(params, grid)
    k = int(np.argmax(values))
    return OptimalPoint(float(grid[k]), float(values[k]))


REFERENCE_SURFACES = {
    "D": FrictionParams(1.2801, 23.99, 0.52),
    "W": FrictionParams(0.857, 33.822, 0.347),
    "S": FrictionParams(0.1946, 94.129, 0.0646),
}
SURFACE_NAMES = {"D": "asphalt dry", "W": "asphalt wet", "S": "snow"}


def reference_surface(name: str) -> FrictionParams:
    """Published triple for tag ``D`` (dry asphalt), ``W`` (wet asphalt) or ``S`` (snow)."""
    try:
        return REFERENCE_SURFACES[name]
    except KeyError:
        raise KeyError(f"unknown surface tag {name!r}; expected one of D, W, S") from None
