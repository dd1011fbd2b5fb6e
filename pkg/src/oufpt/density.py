"""First hitting densities and CDFs assembled from solved weight functions.

Forward route: solve for the boundary density in ``theta = e^t - 1`` and
differentiate the heat-potential representation of the transition density
at the barrier.  Backward route: solve for the density in
``vartheta = 1 - e^{-t}`` (or in plain ``t`` for long horizons) and integrate
the double-layer representation of ``G(t, z)`` and its time derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from . import model
from .errors import InfiniteTime, InvalidParams, RequiresDenseGrid
from .kernels import backward_spec, backward_time_spec, forward_forcing, forward_spec
from .volterra import (
    Scheme,
    TimeGrid,
    WeightFunction,
    product_weights,
    solve_block_quadratic,
    solve_trapezoidal,
)

_SQRT_PI = math.sqrt(math.pi)
_EXP_CUTOFF = 700.0  # exp(-700) is below any tolerance of interest
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(10)
_MIN_COVER = 4


@dataclass(frozen=True)
class DensityCurve:
    """Density ``g`` and/or CDF ``G`` sampled at dimensionless times ``t``."""

    t: np.ndarray
    g: np.ndarray | None = None
    G: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def with_cdf(self, G) -> DensityCurve:
        return DensityCurve(self.t, self.g, np.asarray(G, dtype=float), self.meta)

    def with_density(self, g) -> DensityCurve:
        return DensityCurve(self.t, np.asarray(g, dtype=float), self.G, self.meta)


def _solver(scheme: Scheme):
    if scheme is Scheme.BLOCK_QUADRATIC:
        return solve_block_quadratic
    if scheme is Scheme.TRAPEZOIDAL:
        return solve_trapezoidal
    raise InvalidParams(f"no Volterra solver for scheme {scheme}")


def _as_times(t_grid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1 or np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidParams("times must be finite and non-negative")
    return t


def _check_coverage(nu: WeightFunction, x_max: float):
    if x_max > nu.grid.end * (1.0 + 1e-12):
        raise InvalidParams(
            f"evaluation point {x_max} lies beyond the weight function's range {nu.grid.end}"
        )
    covering = np.count_nonzero(nu.nodes[1:] <= x_max * (1.0 + 1e-12))
    if x_max > 0 and covering < _MIN_COVER:
        raise RequiresDenseGrid(
            f"only {covering} weight-function steps cover [0, {x_max}]; refine the solve"
        )


# --------------------------------------------------------------------------
# forward route


def nu_forward(
    z: float, b: float, n: int, theta_end: float, scheme: Scheme = Scheme.BLOCK_QUADRATIC
) -> WeightFunction:
    """Boundary density of the forward problem on a uniform theta grid of ``n`` steps."""
    spec = forward_spec(z, b, theta_end)
    nu = _solver(scheme)(spec, TimeGrid.uniform(theta_end, n))
    # the forcing carries the sharp onset; interpolate only the smooth remainder
    return nu.with_known(lambda x: -np.asarray(forward_forcing(x, z, b)))


def _forward_free_term(t, z, b):
    # -(e^t b - z) exp(-(e^t b - z)^2 / E + 2t) / sqrt(pi E^3), E = e^{2t} - 1
    e2 = np.expm1(2.0 * t)
    d = math.exp(t) * b - z
    return -d * math.exp(-d * d / e2 + 2.0 * t - 1.5 * math.log(e2)) / _SQRT_PI


def forward_integrand(nu: WeightFunction, theta: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Regular part of the forward density integrand on ``m + 1`` equispaced points of ``[0, theta]``.

    The ``(theta - theta')^{-3/2}`` singularity is reduced to ``-1/2`` by
    dividing the difference ``nu(theta') - nu(theta)`` by ``theta - theta'``;
    at ``theta' = theta`` the quotient is the one-sided derivative ``-nu'``.
    The remaining ``1/sqrt`` factor is left to product integration.
    """
    hs = theta / m
    s = np.arange(m + 1) * hs
    s[-1] = theta
    vals = np.asarray(nu(s), dtype=float)
    diff = np.empty(m + 1)
    diff[:-1] = (vals[:-1] - vals[-1]) / (theta - s[:-1])
    diff[-1] = -(3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * hs)
    span = 2.0 + theta + s
    r = (theta - s) / span
    amp = (1.0 - 2.0 * b * b * r) * np.exp(-b * b * r) * (1.0 + s) / span ** 1.5
    return s, amp * diff


def _forward_integral(nu: WeightFunction, theta: float, b: float) -> tuple[float, float]:
    """Split the hypersingular theta-integral into two regular pieces.

    Returns ``(I1, I2)`` with the full integral equal to ``I1 + nu(theta) * I2``:
    ``I1`` carries the difference ``nu(theta') - nu(theta)`` and is done by
    quadratic product integration, ``I2`` is a closed-form integrand handled
    by Gauss-Legendre in ``sqrt(theta - theta')``.
    """
    h_nu = nu.nodes[1] - nu.nodes[0]
    # the onset near theta = 0 is steep, so short ranges still get a fine rule
    m = max(512, 2 * math.ceil(theta / h_nu))
    s, integrand = forward_integrand(nu, theta, b, m)
    i1 = float(np.dot(product_weights(m, theta / m), integrand))

    if b == 0.0:
        return i1, 0.0
    # u = sqrt(theta - theta'), d theta' = 2 u du
    root = math.sqrt(theta)
    u = 0.5 * root * (_GAUSS_X + 1.0)
    wu = 0.5 * root * _GAUSS_W
    tp = theta - u * u
    span = 2.0 + theta + tp
    r = u * u / span
    b2 = b * b
    # ((1 - 2 b^2 r) e^{-b^2 r} - 1) / u^2, free of cancellation
    with np.errstate(invalid="ignore", divide="ignore"):
        em1 = np.where(r > 0, np.expm1(-b2 * r) / np.where(r > 0, r, 1.0), -b2)
    bracket = (em1 - 2.0 * b2 * np.exp(-b2 * r)) / span
    i2 = float(np.sum(wu * 2.0 * bracket * (1.0 + tp) / span ** 1.5))
    return i1, i2


def density_forward(nu: WeightFunction, z: float, b: float, t_grid) -> DensityCurve:
    """Hitting density from the forward weight function (``nu`` in theta)."""
    if nu.coordinate != "theta":
        raise InvalidParams("density_forward needs a weight function in theta")
    t = _as_times(t_grid)
    theta = np.asarray(model.theta_of_t(t), dtype=float)
    _check_coverage(nu, float(theta.max()))
    g = np.zeros_like(t)
    for k, (tk, th) in enumerate(zip(t, theta)):
        if tk == 0.0:
            continue
        e2 = math.expm1(2.0 * tk)
        nu_th = float(nu(th))
        i1, i2 = _forward_integral(nu, th, b)
        g[k] = (
            _forward_free_term(tk, z, b)
            - (math.exp(tk) * b + math.exp(2.0 * tk) / math.sqrt(math.pi * e2)) * nu_th
            + math.exp(2.0 * tk) / _SQRT_PI * (i1 + nu_th * i2)
        )
    meta = {"z": z, "b": b, "route": "forward", "scheme": nu.scheme.value, "n": nu.grid.n_steps}
    return DensityCurve(t, g, None, meta)


def cdf_forward(nu: WeightFunction, z: float, b: float, t_grid, step: float = 5e-3) -> DensityCurve:
    """CDF by cumulative Simpson integration of the forward density.

    The density is integrated on a uniform auxiliary grid no coarser than the
    requested one; requested times are served by Hermite interpolation, which
    uses ``g`` as the slope of ``G``.
    """
    t = _as_times(t_grid)
    t_end = float(t.max())
    gaps = np.diff(np.unique(t))
    if gaps.size:
        step = min(step, max(float(gaps.min()), 1e-5))
    dense = np.linspace(0.0, t_end, 2 * max(1, math.ceil(t_end / step / 2 - 1e-9)) + 1)
    g_dense = density_forward(nu, z, b, dense).g
    # Simpson panels over the onset can dip below zero at roundoff scale
    G_dense = np.maximum(cumulative_simpson(g_dense, x=dense, initial=0.0), 0.0)
    if dense.shape == t.shape and np.allclose(dense, t, rtol=0.0, atol=1e-12 * max(t_end, 1.0)):
        curve = DensityCurve(t, g_dense, None, density_forward(nu, z, b, t[:1]).meta)
        return curve.with_cdf(G_dense)
    G = np.maximum(CubicHermiteSpline(dense, G_dense, g_dense)(t), 0.0)
    return density_forward(nu, z, b, t).with_cdf(G)


# --------------------------------------------------------------------------
# backward route


def nu_backward(
    b: float, n: int, vartheta_end: float, scheme: Scheme = Scheme.BLOCK_QUADRATIC
) -> WeightFunction:
    """Backward boundary density on a uniform vartheta grid (independent of z)."""
    spec = backward_spec(b, vartheta_end)
    return _solver(scheme)(spec, TimeGrid.uniform(vartheta_end, n))


def nu_backward_time(
    b: float, n: int, t_end: float, scheme: Scheme = Scheme.BLOCK_QUADRATIC
) -> WeightFunction:
    """Backward boundary density on a uniform grid in plain time; for long horizons."""
    spec = backward_time_spec(b, t_end)
    return _solver(scheme)(spec, TimeGrid.uniform(t_end, n))


def _graded_panels(x: float, breaks: np.ndarray, a2: float):
    """Gauss-Legendre rule on ``[0, x]`` graded towards ``x``.

    ``breaks`` are interpolation breakpoints of the weight function.  Near
    ``x`` the integrands behave like ``exp(-a2 / s) s^{-p}`` with
    ``s = x - x'``, so panels double in width away from ``s_min = a2/700``
    and the sliver ``s < s_min`` is dropped.
    """
    s_min = a2 / _EXP_CUTOFF
    if s_min >= x:
        return np.empty(0), np.empty(0)
    n_geo = int(math.ceil(math.log2(x / s_min))) + 1
    graded = x - s_min * 2.0 ** np.arange(n_geo)
    edges = np.concatenate(([0.0, x - s_min], breaks[(breaks > 0) & (breaks < x - s_min)], graded[graded > 0]))
    edges = np.unique(edges)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    wts = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return pts, wts


def _breaks(nu: WeightFunction) -> np.ndarray:
    if nu.scheme is Scheme.BLOCK_QUADRATIC:
        return nu.nodes[::2]
    return nu.nodes


def _safe_exp(expo):
    return np.where(expo > -_EXP_CUTOFF - 45.0, np.exp(np.maximum(expo, -_EXP_CUTOFF - 45.0)), 0.0)


def _backward_vartheta(nu, z, b, t, want_density):
    v = float(model.vartheta_of_t(t))
    a2 = (z - b) ** 2 * (1.0 - v) / 2.0
    vp, w = _graded_panels(v, _breaks(nu), a2)
    if vp.size == 0:
        return 0.0
    p = (v - vp) * (2.0 - v - vp)
    y = z * (1.0 - v) - b * (1.0 - vp)
    common = _safe_exp(-y * y / p) * (1.0 - vp) * np.asarray(nu(vp)) / _SQRT_PI
    if not want_density:
        return 2.0 * float(np.sum(w * y * common / p ** 1.5))
    first = (y * y - 1.5 * p) * y * common / p ** 3.5
    second = (y * y - 0.5 * p) * common / p ** 2.5
    return 4.0 * (1.0 - v) ** 2 * float(np.sum(w * first)) + 4.0 * (1.0 - v) * z * float(np.sum(w * second))


def _backward_time(nu, z, b, t, want_density):
    # lag form: G = (2/sqrt(pi)) int_0^t Y e^{-Y^2/Q} Q^{-3/2} nu(t - u) du, Y = z e^{-u} - b, Q = 1 - e^{-2u}
    a2 = (z - b) ** 2 / 2.0
    tp, w = _graded_panels(t, _breaks(nu), a2)
    if tp.size == 0:
        return 0.0
    u = t - tp
    eu = np.exp(-u)
    q = -np.expm1(-2.0 * u)
    y = z * eu - b
    base = 2.0 / _SQRT_PI * _safe_exp(-y * y / q) / q ** 1.5 * np.asarray(nu(tp))
    if not want_density:
        return float(np.sum(w * y * base))
    dy = -z * eu
    dq = 2.0 * eu * eu
    bracket = dy - 1.5 * y * dq / q - y * (2.0 * y * dy / q - y * y * dq / (q * q))
    return float(np.sum(w * bracket * base))


def _backward_eval(nu, z, b, t_grid, want_density):
    if not z > b:
        raise InvalidParams("backward route needs z > b")
    t = _as_times(t_grid)
    if nu.coordinate == "vartheta":
        t_max = float(t.max())
        if model.vartheta_of_t(t_max) >= 1.0:
            raise InfiniteTime(f"t={t_max} is out of reach of the vartheta grid; use nu_backward_time")
        _check_coverage(nu, float(model.vartheta_of_t(t_max)))
        worker = _backward_vartheta
    elif nu.coordinate == "t":
        _check_coverage(nu, float(t.max()))
        worker = _backward_time
    else:
        raise InvalidParams(f"unsupported weight-function coordinate {nu.coordinate!r}")
    return t, np.array([worker(nu, z, b, float(tk), want_density) if tk > 0 else 0.0 for tk in t])


def cdf_backward(nu: WeightFunction, z: float, b: float, t_grid) -> DensityCurve:
    """``G(t, z)`` from the backward weight function (vartheta or time coordinate)."""
    t, G = _backward_eval(nu, z, b, t_grid, want_density=False)
    meta = {"z": z, "b": b, "route": "backward", "scheme": nu.scheme.value, "n": nu.grid.n_steps}
    return DensityCurve(t, None, G, meta)


def density_backward(nu: WeightFunction, z: float, b: float, t_grid) -> DensityCurve:
    """``g(t, z) = G_t(t, z)`` from the backward weight function."""
    t, g = _backward_eval(nu, z, b, t_grid, want_density=True)
    meta = {"z": z, "b": b, "route": "backward", "scheme": nu.scheme.value, "n": nu.grid.n_steps}
    return DensityCurve(t, g, None, meta)


# --------------------------------------------------------------------------
# convenience pipelines


#: Largest step in t that a uniform theta or vartheta grid may leave at its coarse end.
MAX_CURVE_STEP = 0.05


def _end_step(t_end: float, n: int) -> float:
    # both maps stretch a uniform step by e^t at the coarse end: (e^T - 1) / n
    return math.expm1(t_end) / n


def forward_curve(z: float, b: float, t_grid, n: int = 500, scheme=Scheme.BLOCK_QUADRATIC) -> DensityCurve:
    """Forward pipeline; intended for short and moderate horizons.

    A uniform theta grid spends its steps at late times, so early times are
    resolved only if ``(e^T - 1) / n <= MAX_CURVE_STEP``.
    """
    t = _as_times(t_grid)
    t_end = float(t.max())
    if _end_step(t_end, n) > MAX_CURVE_STEP:
        need = math.ceil(math.expm1(t_end) / MAX_CURVE_STEP)
        raise RequiresDenseGrid(
            f"n={n} theta steps leave the onset unresolved up to t={t_end}; "
            f"use n >= {need + need % 2} or the backward pipeline"
        )
    nu = nu_forward(z, b, n, float(model.theta_of_t(t_end)), scheme)
    return cdf_forward(nu, z, b, t)


def backward_curve(z: float, b: float, t_grid, n: int = 500, scheme=Scheme.BLOCK_QUADRATIC) -> DensityCurve:
    """Backward pipeline.

    Uses the vartheta grid while it resolves the horizon, see
    :data:`MAX_CURVE_STEP`, and the plain-time route of
    :func:`survival_long_horizon` beyond that, with a step of at most
    ``min(T / n, 0.02)``.
    """
    t = _as_times(t_grid)
    t_end = float(t.max())
    if _end_step(t_end, n) <= MAX_CURVE_STEP:
        nu = nu_backward(b, n, float(model.vartheta_of_t(t_end)), scheme)
        G = cdf_backward(nu, z, b, t).G
        return density_backward(nu, z, b, t).with_cdf(G)
    survival, g, cut = _long_horizon(z, b, t, min(t_end / n, 0.02), want_density=True)
    meta = {"z": z, "b": b, "route": "backward-time", "scheme": Scheme.BLOCK_QUADRATIC.value, "cut": cut}
    return DensityCurve(t, g, 1.0 - survival, meta)


def _trusted_extent(t, fine, coarse, rel: float = 1e-2, floor: float = 1e-12, onset: float = 1.0) -> int:
    """Number of leading samples before two resolutions start to diverge.

    The growing mode amplifies errors by ``exp(r t)`` with ``r < 1/2``, so
    before ``onset`` differences are ordinary discretization error.
    """
    bad = (t >= onset) & (np.abs(fine - coarse) > rel * np.abs(fine) + floor)
    return int(np.argmax(bad)) if bad.any() else fine.size


#: Horizon beyond which a barrier above the mean is never solved directly.
_GROWTH_HORIZON = 60.0


def survival_long_horizon(z: float, b: float, t_grid, step: float = 0.02) -> tuple[np.ndarray, float | None]:
    """``1 - G(t, z)`` on an arbitrary horizon, and the time from which it is extrapolated.

    The backward density is solved in plain time.  For ``b <= 0`` that is
    stable and the result is returned directly.  For ``b > 0`` the density
    grows like ``exp(r t)`` and so does every error, while ``1 - G`` itself
    decays.  The survival is then accepted only while a half-resolution
    solve agrees with it; afterwards it is continued by the exponential decay
    fitted on the last trusted unit of time.  Since ``1 - G`` is
    nonincreasing, the continuation never exceeds the last trusted value.
    The second return value is the cut time, or ``None`` when no cut was made.
    """
    survival, _, cut = _long_horizon(z, b, _as_times(t_grid), step, want_density=False)
    return survival, cut


def _long_horizon(z, b, t, step, want_density):
    if not z > b:
        raise InvalidParams("survival needs z > b")
    t_end = float(t.max())
    if t_end == 0.0:
        return np.ones_like(t), (np.zeros_like(t) if want_density else None), None
    horizon = t_end if b <= 0 else min(t_end, _GROWTH_HORIZON)
    n = 4 * math.ceil(horizon / step / 4)
    fine_nu = nu_backward_time(b, n, horizon)

    def density(times):
        return density_backward(fine_nu, z, b, times).g if want_density else None

    if b <= 0:
        return 1.0 - cdf_backward(fine_nu, z, b, t).G, density(t), None

    probe = np.union1d(t[t <= horizon], np.linspace(0.0, horizon, 1201))
    fine = 1.0 - cdf_backward(fine_nu, z, b, probe).G
    coarse = 1.0 - cdf_backward(nu_backward_time(b, n // 2, horizon), z, b, probe).G
    k = _trusted_extent(probe, fine, coarse)
    if k == probe.size and horizon == t_end:
        return fine[np.searchsorted(probe, t)], density(t), None
    k = max(k, 3)
    t_cut, s_cut = float(probe[k - 1]), max(float(fine[k - 1]), 0.0)
    window = (probe[:k] >= t_cut - 1.0) & (fine[:k] > 0)
    rate = 0.0
    if window.sum() >= 2:
        rate = max(0.0, -np.polyfit(probe[:k][window], np.log(fine[:k][window]), 1)[0])
    out = s_cut * np.exp(-rate * np.maximum(t - t_cut, 0.0))
    early = t <= t_cut
    out[early] = fine[np.searchsorted(probe, t[early])]
    g = None
    if want_density:
        g = rate * out
        if early.any():
            g[early] = density(t[early])
    return out, g, t_cut


def expected_hitting_time(
    z: float,
    b: float,
    t_max: float = 50.0,
    tail_tol: float = 1e-3,
    n: int | None = None,
) -> tuple[float, bool]:
    """Truncated mean ``int_0^t_max (1 - G(t)) dt`` and a flag for missing tail mass.

    ``n`` fixes the number of Volterra steps on ``[0, t_max]``; by default the
    step is 0.02.  See :func:`survival_long_horizon` for barriers above the mean.
    """
    if not z > b:
        raise InvalidParams("expected hitting time needs z > b")
    # the plain-time route has no overflow limit, so t_max is not capped at T_MAX
    if not (t_max > 0 and math.isfinite(t_max)):
        raise InvalidParams("t_max must be positive and finite")
    step = 0.02 if n is None else t_max / n
    gap2 = (z - b) ** 2
    early = np.geomspace(min(1e-3 * gap2, 1e-3), min(t_max, max(10.0 * gap2, 1.0)), 400)
    t = np.union1d(np.concatenate(([0.0], early)), np.linspace(0.0, t_max, 2001))
    survival, _ = survival_long_horizon(z, b, t, step)
    mean = float(cumulative_simpson(survival, x=t)[-1])
    return mean, bool(survival[-1] > tail_tol)
