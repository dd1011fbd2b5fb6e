"""Independent oracles: PDE, Laplace inversion and Monte Carlo."""

from .crank_nicolson import CNConfig, crank_nicolson_cdf
from .laplace import (
    StehfestConfig,
    gaver_stehfest_density,
    invert,
    laplace_u,
    parabolic_cylinder_D,
    stehfest_weights,
)
from .montecarlo import MCConfig, MCResult, dkw_half_width, mc_hitting_cdf

__all__ = [
    "CNConfig",
    "MCConfig",
    "MCResult",
    "StehfestConfig",
    "crank_nicolson_cdf",
    "dkw_half_width",
    "gaver_stehfest_density",
    "invert",
    "laplace_u",
    "mc_hitting_cdf",
    "parabolic_cylinder_D",
    "stehfest_weights",
]
