"""Crank-Nicolson solver for the backward Kolmogorov equation of the CDF.

    G_t = -z G_z + G_zz / 2,   G(0, z) = 0,  G(t, b) = 1,  G(t, z_max) = 0
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..errors import InvalidParams, UnstableConfig, UnstableConfigWarning

_FAR_FIELD_MARGIN = 6.0


@dataclass(frozen=True)
class CNConfig:
    """Space step ``h``, time step ``k`` and far-field boundary ``z_max``.

    ``z_max=None`` places the boundary six units above the highest requested
    start.  With ``strict=True`` a too-coarse grid raises instead of falling
    back to upwinding.
    """

    h: float = 0.005
    k: float = 0.005
    z_max: float | None = None
    strict: bool = False

    def __post_init__(self):
        if not (self.h > 0 and self.k > 0):
            raise InvalidParams("h and k must be positive")


def _operator(z, h, upwind):
    """Tridiagonal coefficients (lower, diag, upper) of ``-z d/dz + (1/2) d2/dz2``."""
    diff = 0.5 / (h * h)
    if upwind:
        # drift -z G_z moves information towards larger z where z > 0
        pos = np.maximum(z, 0.0) / h
        neg = np.maximum(-z, 0.0) / h
        lower = diff + pos
        upper = diff + neg
        diag = -2.0 * diff - pos - neg
    else:
        lower = diff + z / (2.0 * h)
        upper = diff - z / (2.0 * h)
        diag = np.full_like(z, -2.0 * diff)
    return lower, diag, upper


def crank_nicolson_cdf(z_request, t_grid, b: float, cfg: CNConfig = CNConfig()) -> np.ndarray:
    """``G(t, z)`` on the requested times (rows) and starts (columns).

    Columns come from linear interpolation in ``z``, rows from linear
    interpolation between time levels.
    """
    z_request = np.atleast_1d(np.asarray(z_request, dtype=float))
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(z_request <= b):
        raise InvalidParams("requested starts must lie above the barrier")
    if np.any(t_grid < 0):
        raise InvalidParams("times must be non-negative")
    z_max = cfg.z_max if cfg.z_max is not None else float(z_request.max()) + _FAR_FIELD_MARGIN
    if not z_max > z_request.max():
        raise InvalidParams("z_max must exceed every requested start")

    n_space = int(round((z_max - b) / cfg.h))
    h = (z_max - b) / n_space
    z = b + h * np.arange(n_space + 1)
    peclet = max(abs(z_max), abs(b)) * h
    upwind = peclet > 2.0
    if upwind:
        msg = f"cell Peclet number {peclet:.3g} > 2; central differences would oscillate"
        if cfg.strict:
            raise UnstableConfig(msg)
        warnings.warn(msg + ", using first-order upwinding", UnstableConfigWarning, stacklevel=2)

    zi = z[1:-1]
    lower, diag, upper = _operator(zi, h, upwind)
    k = cfg.k
    ab = np.zeros((3, zi.size))
    ab[0, 1:] = -0.5 * k * upper[:-1]
    ab[1, :] = 1.0 - 0.5 * k * diag
    ab[2, :-1] = -0.5 * k * lower[1:]

    g = np.zeros(n_space + 1)
    g[0] = 1.0
    n_steps = int(np.ceil(t_grid.max() / k - 1e-9)) if t_grid.size else 0
    levels = np.empty((n_steps + 1, z_request.size))
    levels[0] = 0.0
    for step in range(1, n_steps + 1):
        inner = g[1:-1]
        rhs = inner + 0.5 * k * (lower * g[:-2] + diag * inner + upper * g[2:])
        # implicit half of the Dirichlet data; the far-field value is 0
        rhs[0] += 0.5 * k * lower[0]
        g = np.concatenate(([1.0], solve_banded((1, 1), ab, rhs), [0.0]))
        levels[step] = np.interp(z_request, z, g)

    times = k * np.arange(n_steps + 1)
    out = np.empty((t_grid.size, z_request.size))
    for j in range(z_request.size):
        out[:, j] = np.interp(t_grid, times, levels[:, j])
    return out
