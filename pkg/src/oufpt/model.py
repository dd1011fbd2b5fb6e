"""Process parameters, normalization and the coordinate maps.

After normalization the process is ``dX = -X dt + dW`` started at ``z`` with
a constant barrier ``b < z``.  Three time changes turn the hitting problem
into heat equations with moving boundaries:

* forward, unbounded:   ``tau = (e^{2t} - 1)/2``,  ``theta = e^t - 1``
* backward, compact:    ``lambda_c = (1 - e^{-2t})/2``, ``vartheta = 1 - e^{-t}``

All maps accept scalars or numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ImmediateHit, InfiniteTime, InvalidParams

#: Largest time accepted by the forward (tau/theta) maps; e^{2t} overflows near 355.
T_MAX = 300.0


class Orientation(enum.Enum):
    FROM_ABOVE = "from_above"
    FROM_BELOW = "from_below"


@dataclass(frozen=True)
class OUParams:
    """Raw parameters of ``dX = rate (mean - X) dt + sigma dW``, ``X_0 = start``."""

    rate: float
    mean: float
    sigma: float
    start: float
    barrier: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidParams(f"rate must be positive and finite, got {self.rate}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidParams(f"sigma must be positive and finite, got {self.sigma}")
        if self.start == self.barrier:
            raise ImmediateHit("start coincides with the barrier")


@dataclass(frozen=True)
class NormalizedProblem:
    """Dimensionless hitting-from-above problem; ``rate`` converts times back."""

    z: float
    b: float
    orientation: Orientation = Orientation.FROM_ABOVE
    rate: float = 1.0

    def __post_init__(self):
        if self.z == self.b:
            raise ImmediateHit("start coincides with the barrier")
        if not self.z > self.b:
            raise InvalidParams(f"normalized start must lie above the barrier (z={self.z}, b={self.b})")

    def physical_time(self, t):
        return np.asarray(t, dtype=float) / self.rate

    def dimensionless_time(self, t_physical):
        return np.asarray(t_physical, dtype=float) * self.rate


def normalize(p: OUParams) -> NormalizedProblem:
    """Map raw OU parameters to the unit problem, reflecting hits from below.

    Returned times are dimensionless: ``t_bar = rate * t_physical``.
    """
    scale = math.sqrt(p.rate) / p.sigma
    z = scale * (p.start - p.mean)
    b = scale * (p.barrier - p.mean)
    if z == b:
        raise ImmediateHit("start and barrier coincide after scaling")
    if z > b:
        return NormalizedProblem(z, b, Orientation.FROM_ABOVE, p.rate)
    return NormalizedProblem(-z, -b, Orientation.FROM_BELOW, p.rate)


def _check_forward_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParams("time must be non-negative")
    if np.any(t > T_MAX):
        raise InvalidParams(f"time exceeds T_MAX={T_MAX}; use the backward coordinates")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def tau_of_t(t):
    t = _check_forward_t(t)
    return _out(0.5 * np.expm1(2.0 * t))


def theta_of_t(t):
    t = _check_forward_t(t)
    return _out(np.expm1(t))


def t_of_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise InvalidParams("theta must be non-negative")
    return _out(np.log1p(theta))


def theta_of_tau(tau):
    tau = np.asarray(tau, dtype=float)
    # sqrt(2 tau + 1) - 1 without cancellation for small tau
    return _out(2.0 * tau / (np.sqrt(2.0 * tau + 1.0) + 1.0))


def vartheta_of_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParams("time must be non-negative")
    return _out(-np.expm1(-t))


def t_of_vartheta(vartheta):
    v = np.asarray(vartheta, dtype=float)
    if np.any(v < 0):
        raise InvalidParams("vartheta must be non-negative")
    if np.any(v >= 1):
        raise InfiniteTime("vartheta >= 1 corresponds to infinite time")
    return _out(-np.log1p(-v))


def lambda_of_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParams("time must be non-negative")
    return _out(-0.5 * np.expm1(-2.0 * t))


def vartheta_of_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam >= 0.5):
        raise InfiniteTime("lambda_c >= 1/2 corresponds to infinite time")
    return _out(2.0 * lam / (1.0 + np.sqrt(1.0 - 2.0 * lam)))


@dataclass(frozen=True)
class ForwardCoords:
    t: float
    tau: float
    theta: float
    xi: float | None = None

    @classmethod
    def from_t(cls, t: float, x: float | None = None) -> ForwardCoords:
        xi = None if x is None else math.exp(t) * x
        return cls(t, tau_of_t(t), theta_of_t(t), xi)


@dataclass(frozen=True)
class BackwardCoords:
    t: float
    lambda_c: float
    mu: float | None
    vartheta: float

    @classmethod
    def from_t(cls, t: float, z: float | None = None) -> BackwardCoords:
        mu = None if z is None else math.exp(-t) * z
        lam = lambda_of_t(t)
        if lam >= 0.5:
            raise InfiniteTime(f"t={t} is indistinguishable from infinity in compact coordinates")
        return cls(t, lam, mu, vartheta_of_t(t))
