"""Heat-potential kernels and forcing terms.

Every problem is cast in the generic weakly singular form

    f(s) = g(s) + int_0^s K(s, s') / sqrt(s - s') f(s') ds'

and described by a :class:`KernelSpec`.  Only the regular factor ``K`` lives
here; the ``1/sqrt`` singularity is handled by the solvers in
:mod:`oufpt.volterra`.  Kernels and forcings are numpy-vectorized in their
second argument.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteTime, InvalidParams

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """A weakly singular Volterra problem of the second kind.

    ``lag_kernel``, when given, states that ``K(s, s') == lag_kernel(s - s')``
    and lets solvers tabulate the kernel once per offset.
    """

    regular_kernel: Callable[[float, np.ndarray], np.ndarray]
    forcing: Callable[[np.ndarray], np.ndarray]
    domain_end: float
    label: str
    coordinate: str = "s"
    lag_kernel: Callable[[np.ndarray], np.ndarray] | None = None


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def phi_forward(theta, theta_prime, b):
    """Regular part of the forward kernel in theta coordinates."""
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    s = 2.0 + theta + theta_prime
    val = (
        b * _TWO_OVER_SQRT_PI
        * np.exp(-b * b * (theta - theta_prime) / s)
        * (1.0 + theta_prime) / (s * np.sqrt(s))
    )
    return _scalar(val)


def phi_backward(vartheta, vartheta_prime, b):
    """Regular part of the backward kernel in vartheta coordinates."""
    v = np.asarray(vartheta, dtype=float)
    vp = np.asarray(vartheta_prime, dtype=float)
    if np.any(v >= 1) or np.any(vp >= 1):
        raise InfiniteTime("vartheta must stay below 1")
    s = 2.0 - v - vp
    val = b * _TWO_OVER_SQRT_PI * np.exp(-b * b * (v - vp) / s) * (1.0 - vp) / (s * np.sqrt(s))
    return _scalar(val)


def forward_forcing(theta, z, b):
    """Free heat kernel evaluated on the moving boundary, in theta coordinates.

    Equals ``exp(-((1+theta) b - z)^2 / ((1+theta)^2 - 1)) / sqrt(pi ((1+theta)^2 - 1))``
    and its limit 0 at ``theta = 0``.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise InvalidParams("theta must be non-negative")
    if not z > b:
        raise InvalidParams("forward forcing needs z > b")
    pos = theta > 0
    th = np.where(pos, theta, 1.0)
    q = th * (2.0 + th)  # (1+theta)^2 - 1 without cancellation
    d = th * b - (z - b)  # (1+theta) b - z
    val = np.exp(-d * d / q) / np.sqrt(math.pi * q)
    return _scalar(np.where(pos, val, 0.0))


def forward_spec(z: float, b: float, theta_end: float) -> KernelSpec:
    if not z > b:
        raise InvalidParams("forward problem needs z > b")
    if not theta_end > 0:
        raise InvalidParams("theta_end must be positive")
    return KernelSpec(
        regular_kernel=lambda s, sp: -np.asarray(phi_forward(s, sp, b)),
        forcing=lambda s: -np.asarray(forward_forcing(s, z, b)),
        domain_end=float(theta_end),
        label=f"forward(z={z!r}, b={b!r})",
        coordinate="theta",
    )


def backward_spec(b: float, vartheta_end: float) -> KernelSpec:
    if not 0 < vartheta_end < 1:
        raise InvalidParams("vartheta_end must lie in (0, 1)")
    return KernelSpec(
        regular_kernel=lambda s, sp: np.asarray(phi_backward(s, sp, b)),
        forcing=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        domain_end=float(vartheta_end),
        label=f"backward(b={b!r})",
        coordinate="vartheta",
    )


def backward_lag_kernel(u, b):
    """Backward kernel in plain time, as a function of the lag ``u = t - t'``.

    Substituting ``vartheta = 1 - e^{-t}`` in the vartheta equation turns it
    into a convolution equation whose regular factor is
    ``(2b/sqrt(pi)) exp(-b^2 tanh(u/2)) (1 + e^{-u})^{-3/2} sqrt(u / (1 - e^{-u}))``.
    """
    u = np.asarray(u, dtype=float)
    em = -np.expm1(-u)  # 1 - e^{-u}
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(u > 0, u / np.where(u > 0, em, 1.0), 1.0)
    val = (
        b * _TWO_OVER_SQRT_PI
        * np.exp(-b * b * np.tanh(0.5 * u))
        * (2.0 - em) ** -1.5
        * np.sqrt(ratio)
    )
    return _scalar(val)


def backward_time_spec(b: float, t_end: float) -> KernelSpec:
    """Backward problem posed directly in time; usable for arbitrarily long horizons."""
    if not t_end > 0:
        raise InvalidParams("t_end must be positive")

    def lag(u):
        return np.asarray(backward_lag_kernel(u, b))

    return KernelSpec(
        regular_kernel=lambda s, sp: lag(np.asarray(s, dtype=float) - np.asarray(sp, dtype=float)),
        forcing=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        domain_end=float(t_end),
        label=f"backward-time(b={b!r})",
        coordinate="t",
        lag_kernel=lag,
    )


def abel_forward_forcing(theta, z, b):
    theta = np.asarray(theta, dtype=float)
    pos = theta > 0
    th = np.where(pos, theta, 1.0)
    val = np.exp(-((b - z) ** 2) / (2.0 * th)) / np.sqrt(2.0 * math.pi * th)
    return _scalar(np.where(pos, val, 0.0))


def abel_forward_spec(z: float, b: float, theta_end: float) -> KernelSpec:
    """Small-time (Abel) approximation of the forward equation."""
    if not z > b:
        raise InvalidParams("forward problem needs z > b")
    c = -b / math.sqrt(2.0 * math.pi)
    return KernelSpec(
        regular_kernel=lambda s, sp: np.full(np.shape(sp), c),
        forcing=lambda s: -np.asarray(abel_forward_forcing(s, z, b)),
        domain_end=float(theta_end),
        label=f"abel-forward(z={z!r}, b={b!r})",
        coordinate="theta",
        lag_kernel=lambda u: np.full(np.shape(u), c),
    )


def abel_backward_spec(b: float, vartheta_end: float) -> KernelSpec:
    """Small-time (Abel) approximation of the backward equation."""
    c = b / math.sqrt(2.0 * math.pi)
    return KernelSpec(
        regular_kernel=lambda s, sp: np.full(np.shape(sp), c),
        forcing=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        domain_end=float(vartheta_end),
        label=f"abel-backward(b={b!r})",
        coordinate="vartheta",
        lag_kernel=lambda u: np.full(np.shape(u), c),
    )
