"""Solvers for weakly singular Volterra equations of the second kind.

    f(t) = g(t) + int_0^t K(t, s) / sqrt(t - s) f(s) ds

Two product-integration schemes are provided: the trapezoidal rule for the
Stieltjes form ``-2 int K f d sqrt(t - s)`` (any grid, first order) and the
block-by-block scheme with piecewise quadratic interpolation (uniform grid
with an even number of steps).  The Abel special case ``K = const`` has
closed-form solutions which serve as benchmarks.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import log_ndtr

from .errors import InvalidParams, OddGrid, SolverBreakdown
from .kernels import KernelSpec

_BREAKDOWN_TOL = 1e-12


class GridKind(enum.Enum):
    UNIFORM = "uniform"
    CUSTOM = "custom"


class Scheme(enum.Enum):
    TRAPEZOIDAL = "trapezoidal"
    BLOCK_QUADRATIC = "block-quadratic"
    ABEL_ANALYTIC = "abel-analytic"


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray
    kind: GridKind = GridKind.CUSTOM

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidParams("a grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise InvalidParams("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidParams("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, end: float, n: int) -> TimeGrid:
        if n < 1:
            raise InvalidParams("need at least one step")
        # i * h keeps offsets exact multiples of the step
        h = end / n
        nodes = np.arange(n + 1) * h
        nodes[-1] = end
        return cls(nodes, GridKind.UNIFORM)

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def end(self) -> float:
        return float(self.nodes[-1])

    @property
    def step(self) -> float:
        if self.kind is not GridKind.UNIFORM:
            raise InvalidParams("custom grids have no single step")
        return self.end / self.n_steps


@dataclass(frozen=True)
class WeightFunction:
    """Sampled solution of a Volterra equation (the heat-potential density).

    ``known`` is an optional closed-form component of the solution (typically
    the negated forcing).  Interpolation then acts on ``values - known`` only,
    which is much smoother when the forcing has a sharp onset.
    """

    grid: TimeGrid
    values: np.ndarray
    scheme: Scheme
    coordinate: str = "s"
    label: str = ""
    warnings: tuple[str, ...] = field(default=())
    known: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)
    _residual: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise InvalidParams("values and grid nodes must have the same length")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        residual = values if self.known is None else values - np.asarray(self.known(self.grid.nodes))
        object.__setattr__(self, "_residual", residual)

    def with_known(self, known) -> WeightFunction:
        return replace(self, known=known)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, x):
        """Interpolate: piecewise quadratic on blocks for block solutions, else linear."""
        x = np.asarray(x, dtype=float)
        nodes, vals = self.grid.nodes, self._residual
        n = self.grid.n_steps
        if (
            self.scheme is Scheme.BLOCK_QUADRATIC
            and self.grid.kind is GridKind.UNIFORM
            and n % 2 == 0
        ):
            h = self.grid.step
            blk = np.clip(np.floor(x / (2.0 * h)).astype(int), 0, n // 2 - 1)
            i0 = 2 * blk
            s = x / h - i0
            f0, f1, f2 = vals[i0], vals[i0 + 1], vals[i0 + 2]
            out = 0.5 * (s - 1.0) * (s - 2.0) * f0 - s * (s - 2.0) * f1 + 0.5 * s * (s - 1.0) * f2
        else:
            out = np.interp(x, nodes, vals)
        if self.known is not None:
            out = out + np.asarray(self.known(x))
        return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# quadratic product-integration weights


def _moments(d, h):
    """I_k = int_0^2 s^k / sqrt(d - s h) ds for k = 0, 1, 2 (d >= 2h)."""
    d = np.asarray(d, dtype=float)
    tol = 1e-12 * np.maximum(d, 2.0 * h)
    if np.any(d < 2.0 * h - tol):
        raise InvalidParams("alpha/beta/gamma need d >= 2h")
    root_d = np.sqrt(d)
    root_a = np.sqrt(np.maximum(d - 2.0 * h, 0.0))
    delta = 2.0 * h / (root_d + root_a)  # sqrt(d) - sqrt(d - 2h)
    r = delta / h
    i0 = 2.0 * r
    i1 = r * r * (2.0 * root_d - (2.0 / 3.0) * delta)
    i2 = r ** 3 * ((8.0 / 3.0) * root_d * root_d - 2.0 * root_d * delta + 0.4 * delta * delta)
    return i0, i1, i2


def alpha(d, h):
    """(h/2) int_0^2 (1-s)(2-s) / sqrt(d - s h) ds."""
    i0, i1, i2 = _moments(d, h)
    return _scalar(0.5 * h * (2.0 * i0 - 3.0 * i1 + i2))


def beta(d, h):
    """h int_0^2 s(2-s) / sqrt(d - s h) ds."""
    i0, i1, i2 = _moments(d, h)
    return _scalar(h * (2.0 * i1 - i2))


def gamma(d, h):
    """(h/2) int_0^2 s(s-1) / sqrt(d - s h) ds."""
    i0, i1, i2 = _moments(d, h)
    return _scalar(0.5 * h * (i2 - i1))


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _offset_weights(n_max: int, h: float):
    """History weights indexed by offset ``d = n - i`` for odd and even ``n``.

    Entries assume an interior node; the ``i = 0`` correction (no preceding
    block) is returned separately as ``gamma((d + 2) h, h)``.
    """
    d = np.arange(n_max + 3)
    dd = d.astype(float) * h
    a = np.zeros(d.size)
    b = np.zeros(d.size)
    g = np.zeros(d.size)
    ok = d >= 2
    a[ok], b[ok], g[ok] = alpha(dd[ok], h), beta(dd[ok], h), gamma(dd[ok], h)
    w_odd = np.zeros(n_max + 1)
    w_even = np.zeros(n_max + 1)
    k = np.arange(n_max + 1)
    # even node i: alpha of the block it opens + gamma of the block it closes
    even_node = a[k] + g[k + 2]
    odd_node = b[k + 1]
    # n odd: i even <=> d odd
    w_odd[:] = np.where(k % 2 == 1, even_node, odd_node)
    # n even: i even <=> d even
    w_even[:] = np.where(k % 2 == 0, even_node, odd_node)
    # node 2m (d = 1 or 2) closes the last finished block but opens the current one
    if n_max >= 1:
        w_odd[1] = g[3]
    if n_max >= 2:
        w_even[2] = g[4]
    return w_odd, w_even, g


def history_weights(n: int, h: float) -> np.ndarray:
    """``w_{n,i}`` for ``i = 0..2m`` where ``n`` is ``2m+1`` or ``2m+2`` (m >= 1)."""
    m = (n - 1) // 2
    if m < 1:
        raise InvalidParams("history weights exist only from the second block on")
    w_odd, w_even, g = _offset_weights(n, h)
    table = w_odd if n % 2 == 1 else w_even
    i = np.arange(2 * m + 1)
    w = table[n - i].copy()
    w[0] -= g[n + 2]
    return w


def product_weights(m_steps: int, h: float) -> np.ndarray:
    """Weights W with ``sum W_j f(j h) ~ int_0^{M h} f(s) / sqrt(M h - s) ds``, M even."""
    if m_steps < 2 or m_steps % 2:
        raise OddGrid("product weights need an even number (>= 2) of steps")
    w = np.zeros(m_steps + 1)
    if m_steps > 2:
        w[: m_steps - 1] = history_weights(m_steps, h)
    w[m_steps - 2] += alpha(2 * h, h)
    w[m_steps - 1] += beta(2 * h, h)
    w[m_steps] += gamma(2 * h, h)
    return w


# --------------------------------------------------------------------------
# solvers


def _check_grid(spec: KernelSpec, grid: TimeGrid):
    if grid.end > spec.domain_end * (1.0 + 1e-12):
        raise InvalidParams(f"grid end {grid.end} beyond the problem domain {spec.domain_end}")


def solve_trapezoidal(spec: KernelSpec, grid: TimeGrid) -> WeightFunction:
    """Product trapezoidal rule in the variable ``sqrt(t - s)``; any grid."""
    _check_grid(spec, grid)
    t = grid.nodes
    n = grid.n_steps
    g = np.asarray(spec.forcing(t), dtype=float)
    f = np.empty(n + 1)
    f[0] = g[0]
    for k in range(1, n + 1):
        tk = t[k]
        delta = tk - t[:k + 1]
        root = np.sqrt(delta)
        # c_i = sqrt(D_{k,i-1}) - sqrt(D_{k,i+1}), written without cancellation
        c = np.empty(k + 1)
        c[0] = (t[1] - t[0]) / (root[0] + root[1])
        if k > 1:
            c[1:k] = (t[2:k + 1] - t[0:k - 1]) / (root[0:k - 1] + root[2:k + 1])
        c[k] = root[k - 1]
        kern = np.asarray(spec.regular_kernel(tk, t[:k + 1]), dtype=float)
        diag = 1.0 - kern[k] * c[k]
        if abs(diag) < _BREAKDOWN_TOL:
            raise SolverBreakdown(f"singular diagonal factor at node {k}")
        f[k] = (g[k] + np.dot(kern[:k] * c[:k], f[:k])) / diag
    return WeightFunction(grid, f, Scheme.TRAPEZOIDAL, spec.coordinate, spec.label)


def solve_block_quadratic(spec: KernelSpec, grid: TimeGrid) -> WeightFunction:
    """Block-by-block scheme with quadratic interpolation.

    Solves for ``(F_{2m+1}, F_{2m+2})`` together from a 2x2 system per block.
    A near-singular block falls back to two trapezoidal steps and is
    reported in ``WeightFunction.warnings``.
    """
    _check_grid(spec, grid)
    n = grid.n_steps
    if n % 2:
        raise OddGrid(f"block-by-block scheme needs an even number of steps, got {n}")
    if grid.kind is not GridKind.UNIFORM:
        raise InvalidParams("block-by-block scheme needs a uniform grid")
    h = grid.step
    t = grid.nodes
    g = np.asarray(spec.forcing(t), dtype=float)
    f = np.empty(n + 1)
    f[0] = g[0]
    warnings: list[str] = []

    w_odd, w_even, g_first = _offset_weights(n, h)
    # current-block weights
    a1, b1, c1 = alpha(h, 0.5 * h), beta(h, 0.5 * h), gamma(h, 0.5 * h)
    a2, b2, c2 = alpha(2 * h, h), beta(2 * h, h), gamma(2 * h, h)

    lag = spec.lag_kernel
    if lag is not None:
        kl = np.asarray(lag(np.arange(n + 1) * h), dtype=float)
        k_half = float(np.asarray(lag(0.5 * h)))
        wk_odd = w_odd * kl
        wk_even = w_even * kl

    for m in range(n // 2):
        i1, i2 = 2 * m + 1, 2 * m + 2
        t0, t1, t2 = t[2 * m], t[i1], t[i2]
        if lag is not None:
            k10, k1h, k11 = kl[1], k_half, kl[0]
            k20, k21, k22 = kl[2], kl[1], kl[0]
        else:
            row1 = np.asarray(spec.regular_kernel(t1, np.array([t0, t0 + 0.5 * h, t1])), dtype=float)
            row2 = np.asarray(spec.regular_kernel(t2, np.array([t0, t1, t2])), dtype=float)
            k10, k1h, k11 = row1
            k20, k21, k22 = row2

        hist1 = hist2 = 0.0
        if m > 0:
            past = f[: 2 * m + 1]
            if lag is not None:
                hist1 = np.dot(wk_odd[i1:0:-1], past) - g_first[i1 + 2] * kl[i1] * past[0]
                hist2 = np.dot(wk_even[i2:1:-1], past) - g_first[i2 + 2] * kl[i2] * past[0]
            else:
                ti = t[: 2 * m + 1]
                kr1 = np.asarray(spec.regular_kernel(t1, ti), dtype=float)
                kr2 = np.asarray(spec.regular_kernel(t2, ti), dtype=float)
                hist1 = np.dot(w_odd[i1:0:-1] * kr1, past) - g_first[i1 + 2] * kr1[0] * past[0]
                hist2 = np.dot(w_even[i2:1:-1] * kr2, past) - g_first[i2 + 2] * kr2[0] * past[0]

        f0 = f[2 * m]
        # F1 = g1 + hist1 + a1 k10 f0 + b1 k1h (3/8 f0 + 3/4 F1 - 1/8 F2) + c1 k11 F1
        # F2 = g2 + hist2 + a2 k20 f0 + b2 k21 F1 + c2 k22 F2
        m11 = 1.0 - 0.75 * b1 * k1h - c1 * k11
        m12 = 0.125 * b1 * k1h
        m21 = -b2 * k21
        m22 = 1.0 - c2 * k22
        r1 = g[i1] + hist1 + (a1 * k10 + 0.375 * b1 * k1h) * f0
        r2 = g[i2] + hist2 + a2 * k20 * f0
        det = m11 * m22 - m12 * m21
        if abs(det) < _BREAKDOWN_TOL:
            warnings.append(f"block {m}: singular 2x2 system, trapezoidal fallback")
            f[i1], f[i2] = _trapezoid_steps(spec, t, f, g, m)
            continue
        f[i1] = (r1 * m22 - m12 * r2) / det
        f[i2] = (m11 * r2 - m21 * r1) / det

    return WeightFunction(
        grid, f, Scheme.BLOCK_QUADRATIC, spec.coordinate, spec.label, tuple(warnings)
    )


def _trapezoid_steps(spec, t, f, g, m):
    out = []
    for k in (2 * m + 1, 2 * m + 2):
        root = np.sqrt(t[k] - t[: k + 1])
        c = np.empty(k + 1)
        c[0] = (t[1] - t[0]) / (root[0] + root[1])
        c[1:k] = (t[2:k + 1] - t[0:k - 1]) / (root[0:k - 1] + root[2:k + 1])
        c[k] = root[k - 1]
        kern = np.asarray(spec.regular_kernel(t[k], t[: k + 1]), dtype=float)
        diag = 1.0 - kern[k] * c[k]
        if abs(diag) < _BREAKDOWN_TOL:
            raise SolverBreakdown(f"singular diagonal factor at node {k}")
        f[k] = (g[k] + np.dot(kern[:k] * c[:k], f[:k])) / diag
        out.append(f[k])
    return out


# --------------------------------------------------------------------------
# Abel equations


def abel_nu_forward(theta, z, b):
    """Exact solution of ``nu + b/sqrt(2pi) int nu/sqrt + e^{-(b-z)^2/2theta}/sqrt(2 pi theta) = 0``."""
    theta = np.asarray(theta, dtype=float)
    pos = theta > 0
    th = np.where(pos, theta, 1.0)
    c = z - b
    root = np.sqrt(th)
    first = b * np.exp(0.5 * b * b * th + b * c + log_ndtr(-(b * th + c) / root))
    second = np.exp(-c * c / (2.0 * th)) / np.sqrt(2.0 * math.pi * th)
    return _scalar(np.where(pos, first - second, 0.0))


def abel_nu_backward(vartheta, b):
    """Exact solution of ``nu - b/sqrt(2pi) int nu/sqrt - 1 = 0``: ``2 e^{b^2 v/2} N(b sqrt v)``."""
    v = np.asarray(vartheta, dtype=float)
    if np.any(v < 0):
        raise InvalidParams("vartheta must be non-negative")
    return _scalar(2.0 * np.exp(0.5 * b * b * v + log_ndtr(b * np.sqrt(v))))


def _linear_product_integral(f_vals, nodes):
    """int_0^{t_k} f(s)/sqrt(t_k - s) ds for every node, f piecewise linear."""
    out = np.zeros(nodes.size)
    for k in range(1, nodes.size):
        tk = nodes[k]
        lo, hi = nodes[:k], nodes[1:k + 1]
        ra, rb = np.sqrt(tk - lo), np.sqrt(tk - hi)
        width = hi - lo
        # on [lo, hi]: f = f_lo + (f_hi - f_lo)(s - lo)/width, u = tk - s
        m0 = 2.0 * (ra - rb)  # int ds / sqrt(u)
        # int (s - lo)/sqrt(tk - s) ds = int (ra^2 - u)/sqrt(u) du over [rb^2, ra^2]
        m1 = ra * ra * m0 - (2.0 / 3.0) * (ra ** 3 - rb ** 3)
        slope = (f_vals[1:k + 1] - f_vals[:k]) / width
        out[k] = np.sum(f_vals[:k] * m0 + slope * m1)
    return out


def abel_resolvent(f: Callable[[np.ndarray], np.ndarray], xi: float, t_grid) -> np.ndarray:
    """Solve ``y(t) + xi int_0^t y(s)/sqrt(t-s) ds = f(t)`` through the resolvent.

    ``y = F + pi xi^2 int_0^t exp(pi xi^2 (t-s)) F(s) ds`` with
    ``F = f - xi int_0^t f(s)/sqrt(t-s) ds``; both integrals by product
    integration on ``t_grid`` (which must start at 0).
    """
    nodes = np.asarray(t_grid, dtype=float)
    if nodes[0] != 0 or np.any(np.diff(nodes) <= 0):
        raise InvalidParams("t_grid must start at 0 and increase")
    fv = np.asarray(f(nodes), dtype=float) * np.ones_like(nodes)
    if xi == 0:
        return fv
    big_f = fv - xi * _linear_product_integral(fv, nodes)
    c = math.pi * xi * xi
    inner = cumulative_trapezoid(np.exp(-c * nodes) * big_f, nodes, initial=0.0)
    return big_f + c * np.exp(c * nodes) * inner
