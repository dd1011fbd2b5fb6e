"""Exact results for a barrier at the mean, and the Leblanc-Scaillet baseline.

The Leblanc formulas are kept only as a comparison baseline: they coincide
with the exact solution when ``b == 0`` and are wrong otherwise (for
``b (z - b) > 0`` the "CDF" even tends to ``exp(b (z - b)) > 1``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def normal_cdf(x):
    """Standard normal CDF."""
    return ndtr(x)


def _log_sinh(t):
    # log(sinh t) for t > 0; exact for small t, no overflow for large t
    t = np.asarray(t, dtype=float)
    small = t < 1.0
    ts = np.where(small, t, 1.0)
    tl = np.where(small, 1.0, t)
    sinh_small = 0.5 * (np.expm1(ts) - np.expm1(-ts))
    return np.where(small, np.log(sinh_small), tl - math.log(2.0) + np.log1p(-np.exp(-2.0 * tl)))


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0)):
        raise ValueError("t must be non-negative")
    return t


def _density_with_shift(t, gap, shift):
    # gap * exp(shift - e^{-t} gap^2 / (2 sinh t) + t/2) / sqrt(2 pi sinh^3 t), zero at t = 0
    t = _check_time(t)
    pos = t > 0
    tp = np.where(pos, t, 1.0)
    # e^{-t} / (2 sinh t) = 1 / expm1(2t); exponent assembled before exponentiation
    log_g = (
        math.log(gap)
        + shift
        - gap * gap / np.expm1(2.0 * tp)
        + 0.5 * tp
        - _LOG_SQRT_2PI
        - 1.5 * _log_sinh(tp)
    )
    return _scalar(np.where(pos, np.exp(log_g), 0.0))


def _cdf_argument(t, gap):
    # gap * e^{-t/2} / sqrt(sinh t) = gap * sqrt(2 / expm1(2t))
    with np.errstate(divide="ignore", over="ignore"):
        return gap * np.sqrt(2.0 / np.expm1(2.0 * t))


def density_b0(t, z):
    """First hitting density of level 0 started from ``z > 0``."""
    if not z > 0:
        raise ValueError("z must be positive")
    return _density_with_shift(t, z, 0.0)


def cdf_b0(t, z):
    """``P(s <= t)`` for the barrier at the mean: ``2 N(-e^{-t/2} z / sqrt(sinh t))``."""
    if not z > 0:
        raise ValueError("z must be positive")
    t = _check_time(t)
    return _scalar(2.0 * ndtr(-_cdf_argument(t, z)))


def leblanc_density(t, z, b):
    gap = z - b
    if not gap > 0:
        raise ValueError("z must exceed b")
    return _density_with_shift(t, gap, b * gap)


def leblanc_cdf(t, z, b):
    gap = z - b
    if not gap > 0:
        raise ValueError("z must exceed b")
    t = _check_time(t)
    return _scalar(2.0 * math.exp(b * gap) * ndtr(-_cdf_argument(t, gap)))


def leblanc_cdf_limit(z, b):
    """``lim_{t -> inf} leblanc_cdf(t, z, b) = exp(b (z - b))``."""
    return math.exp(b * (z - b))


def _green(t, x, z):
    # OU transition density from z to x: exp(-(e^t x - z)^2 / (2 eta) + t) / sqrt(2 pi eta)
    eta = 0.5 * np.expm1(2.0 * t)
    return np.exp(-((np.exp(t) * x - z) ** 2) / (2.0 * eta) + t) / np.sqrt(2.0 * math.pi * eta)


def _image_solution(t, x, z):
    """Absorbed density for b = 0 by the method of images (test helper)."""
    return _green(t, x, z) - _green(t, x, -z)
