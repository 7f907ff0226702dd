"""Self-similar profiles of the coagulation equation with kernel ``2 (x y)**(-alpha)``."""
from .baseline import bernstein_ode_residual, bernstein_transform, explicit_profile
from .dynamics import SimConfig, SimState, run
from .errors import CoagScaleError
from .grid import SizeGrid, build_grid, convolve, integrate, interpolate
from .kernel import KernelSpec, eval_kernel, homogeneity, mean_size_sigma
from .profile import (
    Profile,
    b99_gap,
    moment,
    moment_identity_gap,
    residual,
    scale,
    transform_pair,
)
from .solver import SolverConfig, solve, uniqueness_experiment

__version__ = "0.1.0"

__all__ = [
    "CoagScaleError",
    "KernelSpec",
    "Profile",
    "SimConfig",
    "SimState",
    "SizeGrid",
    "SolverConfig",
    "b99_gap",
    "bernstein_ode_residual",
    "bernstein_transform",
    "build_grid",
    "convolve",
    "eval_kernel",
    "explicit_profile",
    "homogeneity",
    "integrate",
    "interpolate",
    "mean_size_sigma",
    "moment",
    "moment_identity_gap",
    "residual",
    "run",
    "scale",
    "solve",
    "transform_pair",
    "uniqueness_experiment",
]
