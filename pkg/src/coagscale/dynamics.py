"""Time-dependent coagulation in conservative (finite-volume) form.

With ``J(x)`` the mass flux through size ``x`` (see :mod:`coagscale.flux`),

    d/dt (x_i f_i dx_i) = J(e_i) - J(e_{i+1}),

so interior fluxes cancel in the total mass and only ``J(x_max)`` can
change it (``J(x_min) = 0`` because nothing lives below the grid).  Time
stepping is explicit Euler with a step small enough to keep every cell
non-negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, LengthMismatch, Stagnation
from .flux import flux_operator
from .grid import SizeGrid, f_at, integrate
from .kernel import KernelSpec, mean_size_sigma
from .profile import Profile, l1_distance, moment
from .solver import rescale_to_mass


@dataclass(frozen=True, eq=False)
class SimState:
    """Size distribution ``f(t, .)`` at the nodes and the time ``t``."""

    grid: SizeGrid
    f_values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        f = np.array(self.f_values, dtype=float)
        if f.shape != (self.grid.n_cells,):
            raise LengthMismatch(f"expected {self.grid.n_cells} values, got {f.shape}")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise DomainError("f must be finite and non-negative")
        if not self.t >= 0:
            raise DomainError("t must be non-negative")
        f.setflags(write=False)
        object.__setattr__(self, "f_values", f)


@dataclass(frozen=True)
class SimConfig:
    """Run controls.

    ``dt_max`` optionally caps the step (``None``: no cap beyond the
    positivity bound and the output times).
    """

    t_end: float
    spec: KernelSpec
    cfl_safety: float = 0.5
    output_times: tuple = ()
    dt_max: Optional[float] = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise DomainError("cfl_safety must lie in (0, 1]")
        times = tuple(float(t) for t in self.output_times)
        if any(b < a for a, b in zip(times, times[1:])):
            raise DomainError("output_times must be sorted")
        if any(t < 0 or t > self.t_end for t in times):
            raise DomainError("output_times must lie in [0, t_end]")
        if self.dt_max is not None and not self.dt_max > 0:
            raise DomainError("dt_max must be positive")
        object.__setattr__(self, "output_times", times)


def _edge_operator(grid: SizeGrid, alpha: float):
    return flux_operator(grid, alpha, "edges", lower_extension=False)


def edge_fluxes(state: SimState, spec: KernelSpec) -> np.ndarray:
    """``J`` at all ``n + 1`` cell edges."""
    return _edge_operator(state.grid, spec.alpha)(state.f_values)


def coagulation_rhs(state: SimState, spec: KernelSpec) -> np.ndarray:
    """``df/dt`` at the nodes from the flux differences."""
    g = state.grid
    j = edge_fluxes(state, spec)
    return (j[:-1] - j[1:]) / (g.nodes * g.weights)


def loss_rate(state: SimState, spec: KernelSpec) -> np.ndarray:
    """``int K(x_i, y) f(y) dy = 2 x_i**(-alpha) M_{-alpha}(f)``."""
    x = state.grid.nodes
    m = integrate(state.grid, x ** (-spec.alpha) * state.f_values)
    return 2.0 * x ** (-spec.alpha) * m


def stable_dt(state: SimState, spec: KernelSpec, cfl_safety: float) -> float:
    """``cfl_safety`` over the largest loss or outflow rate (``inf`` if none)."""
    op = _edge_operator(state.grid, spec.alpha)
    rate = max(float(np.max(loss_rate(state, spec))),
               float(np.max(op.outflow_rate(state.f_values))))
    return cfl_safety / rate if rate > 0 else math.inf


def step(state: SimState, spec: KernelSpec, cfl_safety: float,
         dt_max: float = math.inf) -> SimState:
    """One explicit Euler step of size ``min(stable_dt, dt_max)``."""
    dt = min(stable_dt(state, spec, cfl_safety), dt_max)
    if not math.isfinite(dt):
        raise Stagnation("no finite time step (empty state and no step cap)")
    if dt <= 1e-14 * max(state.t, 1.0):
        raise Stagnation(f"time step underflow (dt = {dt!r} at t = {state.t!r})")
    f = state.f_values + dt * coagulation_rhs(state, spec)
    # outflow bound makes negatives impossible up to roundoff
    f = np.where(f < 0.0, 0.0, f)
    return SimState(state.grid, f, state.t + dt)


def total_mass(state: SimState) -> float:
    """``M_1`` of the state."""
    return integrate(state.grid, state.grid.nodes * state.f_values)


def small_size_fraction(state: SimState) -> float:
    """Share of the mass in the first decade of the grid."""
    x = state.grid.nodes
    m = total_mass(state)
    if m <= 0:
        return 0.0
    low = x < 10.0 * state.grid.x_min
    return integrate(state.grid, np.where(low, x * state.f_values, 0.0)) / m


def rescale_state(state: SimState, spec: KernelSpec,
                  grid: SizeGrid | None = None) -> Profile:
    """``g(xi) = sigma(t)**2 f(t, sigma(t) xi)`` on ``grid`` (default: the state grid)."""
    grid = state.grid if grid is None else grid
    sigma = mean_size_sigma(spec, state.t)
    vals = sigma**2 * f_at(state.grid, state.f_values, sigma * grid.nodes)
    return Profile(grid, vals, spec)


@dataclass
class RunResult:
    """Output-time records of a run."""

    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    small_size_fraction: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    steps: int = 0

    @property
    def mass_drift(self) -> float:
        """Largest ``|M_1(t) - M_1(0)| / M_1(0)`` over the records."""
        m0 = self.mass[0]
        return max(abs(m - m0) for m in self.mass) / m0 if m0 else 0.0


def profile_distance(state: SimState, spec: KernelSpec, reference: Profile) -> float:
    """``int x |g - phi_ref| dx`` with ``phi_ref`` rescaled to the state's mass."""
    m = total_mass(state)
    if m <= 0:
        return math.nan
    ref = rescale_to_mass(reference, m)
    g = rescale_state(state, spec, ref.grid)
    return l1_distance(g, ref, weight="x")


def run(initial: SimState, cfg: SimConfig, reference: Profile | None = None) -> RunResult:
    """Step to ``cfg.t_end``, recording at ``0``, every output time and ``t_end``."""
    spec = cfg.spec
    marks = sorted(set([initial.t, *cfg.output_times, cfg.t_end]))
    marks = [t for t in marks if t >= initial.t]
    res = RunResult()
    state = initial

    def record(s: SimState):
        res.times.append(s.t)
        res.mass.append(total_mass(s))
        res.distance.append(profile_distance(s, spec, reference)
                            if reference is not None else math.nan)
        res.small_size_fraction.append(small_size_fraction(s))
        res.snapshots.append(s)

    cap = math.inf if cfg.dt_max is None else cfg.dt_max
    for target in marks:
        while state.t < target:
            remaining = target - state.t
            state = step(state, spec, cfg.cfl_safety, min(cap, remaining))
            res.steps += 1
            if target - state.t <= 1e-12 * max(target, 1.0):
                state = SimState(state.grid, state.f_values, target)
        record(state)
    return res


def mass_normalized(grid: SizeGrid, values, mass: float = 1.0) -> np.ndarray:
    """Multiply node values so that their ``M_1`` equals ``mass``."""
    values = np.asarray(values, dtype=float)
    m = integrate(grid, grid.nodes * values)
    if not m > 0:
        raise DomainError("initial data has no mass")
    return values * (mass / m)


def moment_of_state(state: SimState, m: float) -> float:
    """``M_m`` of the state (uses the profile quadrature)."""
    return moment(Profile(state.grid, state.f_values, KernelSpec(0.0)), m)
