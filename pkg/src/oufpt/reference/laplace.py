"""Gaver-Stehfest inversion of the hitting-time Laplace transform.

The transform of the hitting density for a start ``z`` above the barrier
``b`` is ``u(L) = exp((z^2 - b^2)/2) D_{-L}(z sqrt 2) / D_{-L}(b sqrt 2)`` where
``D`` is the parabolic cylinder function.  The Stehfest weights alternate
in sign and grow quickly, so everything is evaluated in mpmath at a
configurable precision and only the final sum is rounded to a float.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath as mp

from ..errors import InvalidParams, PrecisionExhausted


@dataclass(frozen=True)
class StehfestConfig:
    m: int = 8
    precision_digits: int = 40

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParams("Stehfest m must be at least 1")
        if self.precision_digits < 16:
            raise InvalidParams("precision_digits must be at least 16")


@lru_cache(maxsize=None)
def stehfest_weights(m: int) -> tuple[Fraction, ...]:
    """Exact weights ``omega_1 .. omega_{2m}`` as rationals."""
    if m < 1:
        raise InvalidParams("Stehfest m must be at least 1")
    fact_m = math.factorial(m)
    weights = []
    for k in range(1, 2 * m + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, m) + 1):
            acc += Fraction(
                j ** (m + 1) * math.comb(m, j) * math.comb(2 * j, j) * math.comb(j, k - j), fact_m
            )
        weights.append(acc if (m + k) % 2 == 0 else -acc)
    return tuple(weights)


def invert(transform: Callable, t: float, cfg: StehfestConfig = StehfestConfig()) -> float:
    """``f(t) ~ (ln 2 / t) sum_k omega_k F(k ln 2 / t)`` with ``F`` taking and returning mpf."""
    if not t > 0:
        raise InvalidParams("inversion time must be positive")
    with mp.workdps(cfg.precision_digits):
        step = mp.log(2) / mp.mpf(t)
        total = mp.mpf(0)
        for k, w in enumerate(stehfest_weights(cfg.m), start=1):
            total += mp.mpf(w.numerator) / w.denominator * transform(k * step)
        return float(step * total)


@lru_cache(maxsize=8192)
def _d_integral(nu, x, digits):
    # D_nu(x) = e^{-x^2/4} / Gamma(-nu) int_0^inf e^{-x s - s^2/2} s^{-nu-1} ds, nu < 0
    a = -nu
    split = max(mp.mpf(1), abs(x))
    if a >= 1:
        def integrand(s):
            return mp.exp(-x * s - s * s / 2) * s ** (a - 1)

        edges = [0, split, mp.inf]
    else:
        # s = w^{1/a} absorbs the endpoint singularity s^{a-1}
        p = 1 / a

        def integrand(w):
            s = w ** p
            return mp.exp(-x * s - s * s / 2) * p

        edges = [0, split ** a, mp.inf]
    value, err = mp.quad(integrand, edges, error=True, maxdegree=10)
    if value == 0 or abs(err) > mp.mpf(10) ** (-(digits - 5)) * abs(value):
        raise PrecisionExhausted(
            f"D_{mp.nstr(nu, 8)}({mp.nstr(x, 8)}): quadrature error {mp.nstr(err, 3)} at {digits} digits"
        )
    return mp.exp(-x * x / 4) * value / mp.gamma(a)


def parabolic_cylinder_D(nu, x, precision_digits: int = 40):
    """``D_nu(x)`` for ``nu <= 0`` from its integral representation; returns an mpf."""
    with mp.workdps(precision_digits):
        nu = mp.mpf(nu)
        x = mp.mpf(x)
        if nu > 0:
            raise InvalidParams("only nu <= 0 is supported")
        if nu == 0:
            return +mp.exp(-x * x / 4)
        return +_d_integral(nu, x, precision_digits)


def laplace_u(lam, z: float, b: float, precision_digits: int = 40):
    """Laplace transform ``E[exp(-lam s)]`` of the hitting time, as an mpf."""
    if not z > b:
        raise InvalidParams("need z > b")
    with mp.workdps(precision_digits):
        lam = mp.mpf(lam)
        root2 = mp.sqrt(2)
        num = parabolic_cylinder_D(-lam, mp.mpf(z) * root2, precision_digits)
        den = parabolic_cylinder_D(-lam, mp.mpf(b) * root2, precision_digits)
        return mp.exp((mp.mpf(z) ** 2 - mp.mpf(b) ** 2) / 2) * num / den


def gaver_stehfest_density(t: float, z: float, b: float, cfg: StehfestConfig = StehfestConfig()) -> float:
    """Hitting density at ``t`` by Gaver-Stehfest inversion of ``laplace_u``."""
    if not z > b:
        raise InvalidParams("need z > b")
    # carry a few guard digits into the D evaluations
    digits = cfg.precision_digits + 10
    return invert(lambda lam: laplace_u(lam, z, b, digits), t, cfg)
