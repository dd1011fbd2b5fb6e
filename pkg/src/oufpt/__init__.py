"""First-passage times of the Ornstein-Uhlenbeck process through a constant barrier.

The hitting problem is reduced to weakly singular Volterra equations for a
heat-potential density, solved by product integration, and cross-checked
against closed forms, a PDE solver, Laplace inversion and Monte Carlo.
"""

from .closedform import cdf_b0, density_b0, leblanc_cdf, leblanc_density
from .density import (
    DensityCurve,
    backward_curve,
    cdf_backward,
    cdf_forward,
    density_backward,
    density_forward,
    expected_hitting_time,
    forward_curve,
    nu_backward,
    nu_backward_time,
    nu_forward,
    survival_long_horizon,
)
from .errors import (
    ImmediateHit,
    InfiniteTime,
    InvalidParams,
    OddGrid,
    OUFPTError,
    PrecisionExhausted,
    RequiresDenseGrid,
    SolverBreakdown,
    UnstableConfig,
    UnstableConfigWarning,
)
from .kernels import KernelSpec, backward_spec, forward_spec
from .model import NormalizedProblem, Orientation, OUParams, normalize
from .volterra import Scheme, TimeGrid, WeightFunction, solve_block_quadratic, solve_trapezoidal

__all__ = [
    "DensityCurve",
    "ImmediateHit",
    "InfiniteTime",
    "InvalidParams",
    "KernelSpec",
    "NormalizedProblem",
    "OUFPTError",
    "OUParams",
    "OddGrid",
    "Orientation",
    "PrecisionExhausted",
    "RequiresDenseGrid",
    "Scheme",
    "SolverBreakdown",
    "TimeGrid",
    "UnstableConfig",
    "UnstableConfigWarning",
    "WeightFunction",
    "backward_curve",
    "backward_spec",
    "cdf_b0",
    "cdf_backward",
    "cdf_forward",
    "density_b0",
    "density_backward",
    "density_forward",
    "expected_hitting_time",
    "forward_curve",
    "forward_spec",
    "leblanc_cdf",
    "leblanc_density",
    "normalize",
    "nu_backward",
    "nu_backward_time",
    "nu_forward",
    "solve_block_quadratic",
    "solve_trapezoidal",
    "survival_long_horizon",
]
