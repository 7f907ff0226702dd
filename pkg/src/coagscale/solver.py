"""Scaling profiles from the flux balance ``w x**2 phi(x) = J_phi(x)``.

The map ``T[p] = J_p / (w x**2)`` is positivity preserving and every
profile is a fixed point of it.  ``T`` is quadratic (``T[c p] = c**2 T[p]``),
so the plain iteration is unstable in the amplitude; each step therefore
rescales the amplitude so that ``w M_0 = M_{-alpha}**2`` (an identity of
exact profiles) and dilates back to the normalisation target.

Plain iteration contracts only slowly near the true profile (and not at
all for some small-size modes at ``alpha = 0``), so once it has settled it
hands over to Newton's method on the discrete balance.  The truncated
discrete balance is one equation short of determining a one-parameter
family, so Newton solves

    (w x_i**2 p_i - J_i) / (w x_i**2) + nu (x_min / x_i)**2 = 0,
    normalisation(p) = target,

for ``p`` and a constant flux offset ``nu``.  ``nu`` is a mass flux
through every size (of order ``nu x_min**2``), which is negligible.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    AlphaZero,
    CoagScaleError,
    CollapseToZero,
    DomainError,
    NonPositiveMass,
    NonPositiveMoment,
)
from .flux import flux_operator
from .grid import SizeGrid, f_at, integrate
from .kernel import KernelSpec
from .profile import (
    Profile,
    l1_distance,
    moment,
    moment_identity_gap,
    residual_norms,
    scale,
)

INITS = ("bump", "exponential", "exponential-capped", "shifted-bump", "custom-profile")
NORMALIZATIONS = ("unit-minus-alpha-moment", "prescribed-mass")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    Attributes
    ----------
    tol : float
        Stop when the weighted L1 distance ``int (x**(-alpha) + x) |dp| dx``
        between successive iterates drops to ``tol``.
    max_iter : int
        Cap on the total number of steps (plain and Newton).
    damping : float
        Mixing ``p <- damping T[p] + (1 - damping) p`` in plain steps;
        halved automatically (once, to 0.5) when the iterates oscillate.
    init : str
        One of :data:`INITS`.
    normalization : str
        ``"unit-minus-alpha-moment"`` (``M_{-alpha} = 1``) or
        ``"prescribed-mass"`` (``M_1 = rho``).
    newton : bool
        Polish with Newton's method once plain steps have settled.
    switch_tol : float
        Plain-step distance at which Newton takes over.
    custom_profile : Profile, optional
        Initial profile for ``init = "custom-profile"``.
    """

    tol: float = 1e-10
    max_iter: int = 10000
    damping: float = 1.0
    init: str = "bump"
    normalization: str = "prescribed-mass"
    newton: bool = True
    switch_tol: float = 1e-2
    custom_profile: Profile | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol!r}")
        if not 0 < self.damping <= 1:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if self.init not in INITS:
            raise DomainError(f"init must be one of {INITS}, got {self.init!r}")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.init == "custom-profile" and self.custom_profile is None:
            raise DomainError("init 'custom-profile' needs custom_profile")
        if not self.switch_tol > 0:
            raise DomainError("switch_tol must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("custom_profile")
        return d


@dataclass
class SolveReport:
    """Outcome of :func:`solve`.

    ``converged`` implies ``final_gap <= tol``.  ``diagnostics`` holds the
    step counts of both phases, the damping used, the flux offset ``nu``,
    the relative moment-identity gap and the fixed-point defect
    ``int (x**(-alpha) + x) |T[p] - p| dx``.
    """

    iterations: int
    final_gap: float
    residual_norms: dict
    moment_summary: dict
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- initial data


def initial_values(init: str, grid: SizeGrid, alpha: float) -> np.ndarray:
    """Node values of a named initialisation.

    ``bump``               ``exp(-x - 1/x)``
    ``exponential``        ``exp(-x)`` (only for ``alpha < 1``)
    ``exponential-capped`` ``exp(-x) min(1, x)**(alpha + 1)``
    ``shifted-bump``       ``exp(-x/4 - 4/x)``
    """
    x = grid.nodes
    with np.errstate(over="ignore", under="ignore"):
        if init == "bump":
            return np.exp(-x - 1.0 / x)
        if init == "exponential":
            if alpha >= 1:
                raise DomainError("exponential init has infinite M_{-alpha} for alpha >= 1")
            return np.exp(-x)
        if init == "exponential-capped":
            return np.exp(-x) * np.minimum(1.0, x) ** (alpha + 1.0)
        if init == "shifted-bump":
            return np.exp(-x / 4.0 - 4.0 / x)
    raise DomainError(f"unknown init {init!r}")


# ------------------------------------------------------------ building blocks


def fixed_point_step(p: Profile) -> Profile:
    """``T[p](x) = J_p(x) / (w x**2)`` on the grid of ``p``.

    The zero profile maps to itself.
    """
    op = flux_operator(p.grid, p.alpha, "nodes", lower_extension=True)
    x = p.grid.nodes
    out = op(p.values) / (p.spec.w * x**2)
    return p.with_values(np.maximum(out, 0.0))


def normalize_amplitude(p: Profile) -> Profile:
    """Multiply by ``w M_0 / M_{-alpha}**2`` so that ``w M_0 = M_{-alpha}**2``."""
    m = moment(p, -p.alpha)
    if not m > 0:
        raise CollapseToZero("M_{-alpha} vanished")
    return p.with_values(p.values * (p.spec.w * moment(p, 0.0) / m**2))


def normalize_unit_minus_alpha(p: Profile) -> Profile:
    """``scale(p, a)`` with ``a = M_{-alpha}**(1/alpha)``, giving ``M_{-alpha} = 1``."""
    if p.alpha == 0:
        raise AlphaZero("M_{-alpha} is invariant under scaling when alpha = 0")
    m = moment(p, -p.alpha)
    if not m > 0:
        raise NonPositiveMoment(f"M_{{-alpha}} must be positive, got {m!r}")
    return scale(p, m ** (1.0 / p.alpha))


def rescale_to_mass(p: Profile, rho: float) -> Profile:
    """``scale(p, a)`` with ``a = (M_1 / rho)**(1 / (1 + 2 alpha))``, giving ``M_1 = rho``."""
    if not rho > 0:
        raise NonPositiveMass(f"rho must be positive, got {rho!r}")
    m1 = moment(p, 1.0)
    if not m1 > 0:
        raise NonPositiveMass(f"M_1 must be positive, got {m1!r}")
    return scale(p, (m1 / rho) ** (1.0 / (1.0 + 2.0 * p.alpha)))


def _constraint(spec: KernelSpec, cfg: SolverConfig):
    """Order ``m`` and target of the moment fixed by the normalisation."""
    if cfg.normalization == "unit-minus-alpha-moment" and spec.alpha > 0:
        return -spec.alpha, 1.0
    return 1.0, spec.rho


def _dilate_on_grid(p: Profile, m: float, target: float) -> Profile:
    """Dilate so that ``M_m = target``, interpolating back onto the same grid."""
    alpha = p.alpha
    a = (moment(p, m) / target) ** (1.0 / (m + 2.0 * alpha))
    if abs(a - 1.0) < 1e-15:
        return p
    vals = a ** (1.0 - 2.0 * alpha) * f_at(p.grid, np.asarray(p.values), a * p.grid.nodes)
    return p.with_values(vals)


def _distance(grid: SizeGrid, alpha: float, d: np.ndarray) -> float:
    x = grid.nodes
    return integrate(grid, (x ** (-alpha) + x) * np.abs(d))


# ------------------------------------------------------------------ phases


class _Newton:
    """Newton's method on the flux balance with a constant flux offset."""

    def __init__(self, spec: KernelSpec, grid: SizeGrid, m: float, target: float):
        self.spec, self.grid = spec, grid
        self.op = flux_operator(grid, spec.alpha, "nodes", lower_extension=True)
        x = grid.nodes
        self.wx2 = spec.w * x**2
        self.offset = (grid.x_min / x) ** 2
        self.mom_w = grid.weights * x**m
        self.target = target

    def residual(self, p: np.ndarray, nu: float) -> np.ndarray:
        r = (self.wx2 * p - self.op(p)) / self.wx2 + nu * self.offset
        c = float(np.cumsum(self.mom_w * p)[-1]) - self.target
        return np.append(r, c)

    def step(self, p: np.ndarray, nu: float):
        n = p.size
        jac = np.empty((n + 1, n + 1))
        jac[:n, :n] = -self.op.jacobian(p) / self.wx2[:, None]
        jac[np.arange(n), np.arange(n)] += 1.0
        jac[:n, n] = self.offset
        jac[n, :n] = self.mom_w
        jac[n, n] = 0.0
        dz = np.linalg.solve(jac, -self.residual(p, nu))
        return dz[:n], float(dz[n])


def solve(spec: KernelSpec, cfg: SolverConfig, grid: SizeGrid):
    """Compute a scaling profile.

    Returns
    -------
    (Profile, SolveReport)
        The profile is normalised per ``cfg.normalization``; with
        ``prescribed-mass`` it lives on the grid rescaled so that
        ``M_1 = rho`` holds exactly.

    Raises
    ------
    CollapseToZero
        If the initial data (or an iterate) has no mass.
    """
    alpha = spec.alpha
    if cfg.init == "custom-profile":
        src = cfg.custom_profile
        vals = src.values if src.grid.same_as(grid) else f_at(
            src.grid, np.asarray(src.values), grid.nodes)
    else:
        vals = initial_values(cfg.init, grid, alpha)
    p = Profile(grid, np.maximum(vals, 0.0), spec)
    if not moment(p, -alpha) > 0:
        raise CollapseToZero("initial profile has no mass")
    m, target = _constraint(spec, cfg)

    def normalize(q: Profile) -> Profile:
        return _dilate_on_grid(normalize_amplitude(q), m, target)

    p = normalize(p)
    damping = cfg.damping
    iterations = picard_steps = newton_steps = 0
    gap = np.inf
    prev_diff = None
    flips = 0
    switch = cfg.switch_tol
    nu = 0.0
    converged = False

    while iterations < cfg.max_iter and not converged:
        # plain steps
        while iterations < cfg.max_iter:
            tp = fixed_point_step(p)
            q = normalize(p.with_values(damping * tp.values + (1.0 - damping) * p.values))
            diff = q.values - p.values
            gap = _distance(grid, alpha, diff)
            iterations += 1
            picard_steps += 1
            if prev_diff is not None and damping > 0.5:
                flips = flips + 1 if np.dot(diff, prev_diff) < 0 else 0
                if flips >= 3:
                    damping = 0.5
            prev_diff = diff
            p = q
            if gap <= cfg.tol:
                converged = True
                break
            if cfg.newton and gap <= switch:
                break
        if converged or not cfg.newton or iterations >= cfg.max_iter:
            break

        # Newton polish
        newton = _Newton(spec, grid, m, target)
        z = np.array(p.values)
        nu = 0.0
        ok = False
        start_gap = gap
        for _ in range(50):
            if iterations >= cfg.max_iter:
                break
            try:
                dp, dnu = newton.step(z, nu)
            except (np.linalg.LinAlgError, CoagScaleError):
                break
            z, nu = z + dp, nu + dnu
            iterations += 1
            newton_steps += 1
            gap = _distance(grid, alpha, dp)
            if not np.isfinite(gap) or gap > 10.0 * max(start_gap, 1.0):
                break
            if gap <= cfg.tol:
                ok = True
                break
        scale_ref = np.max(np.abs(z)) if np.all(np.isfinite(z)) else np.inf
        if ok and np.min(z) > -1e-8 * scale_ref:
            p = p.with_values(np.maximum(z, 0.0))
            converged = True
            break
        # not in the basin yet: continue plain steps to a tighter hand-over
        switch *= 0.1
        gap = start_gap
        prev_diff = None
        if switch < cfg.tol:
            switch = 0.0

    if cfg.normalization == "prescribed-mass":
        p = rescale_to_mass(p, spec.rho)
    elif alpha > 0:
        p = normalize_unit_minus_alpha(p)

    report = _report(p, iterations, gap, converged and gap <= cfg.tol, {
        "picard_iterations": picard_steps,
        "newton_iterations": newton_steps,
        "damping_used": damping,
        "flux_offset": nu,
    })
    return p, report


def fixed_point_defect(p: Profile) -> float:
    """``int (x**(-alpha) + x) |T[p] - p| dx``."""
    return _distance(p.grid, p.alpha, fixed_point_step(p).values - p.values)


def _report(p: Profile, iterations: int, gap: float, converged: bool, diag: dict) -> SolveReport:
    mom = p.moments
    diag = dict(diag)
    diag["identity_gap_relative"] = moment_identity_gap(p) / mom["m_minus_alpha"] ** 2
    diag["fixed_point_defect"] = fixed_point_defect(p)
    return SolveReport(
        iterations=int(iterations),
        final_gap=float(gap),
        residual_norms=residual_norms(p),
        moment_summary=dict(mom),
        converged=bool(converged),
        diagnostics=diag,
    )


# -------------------------------------------------------------- uniqueness


Init = Union[str, Profile]


@dataclass
class UniquenessResult:
    """Pairwise distances of independently solved, normalised profiles.

    ``distances[i, j]`` is ``int (x**(-alpha) + x) |p_i - p_j| dx`` after
    each profile has been scaled to ``M_{-alpha} = 1`` (``nan`` where a
    solve failed).  ``status[i]`` is ``"converged"``, ``"not-converged"``
    or the error code of the failure.  ``verdict`` is ``"unique"`` when
    every solve converged and all distances are within ``threshold``,
    ``"not-unique"`` when they converged but differ, and
    ``"inconclusive"`` otherwise.
    """

    labels: list
    distances: np.ndarray
    status: list
    verdict: str
    threshold: float
    reports: list

    @property
    def max_off_diagonal(self) -> float:
        d = self.distances
        off = d[~np.eye(d.shape[0], dtype=bool)]
        return float(np.nanmax(off)) if off.size and np.any(np.isfinite(off)) else float("nan")


def thread_count(default: int | None = None) -> int:
    """Worker cap from ``COAGSCALE_THREADS`` (falls back to the CPU count)."""
    env = os.environ.get("COAGSCALE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or os.cpu_count() or 1


def uniqueness_experiment(spec: KernelSpec, cfg: SolverConfig, grid: SizeGrid,
                          inits: Sequence[Init], threshold: float = 1e-6) -> UniquenessResult:
    """Solve from every initialisation and compare the normalised results."""
    if spec.alpha <= 0:
        raise AlphaZero("the uniqueness experiment needs alpha > 0")
    if len(inits) < 2:
        raise DomainError("need at least two initialisations")

    def one(init: Init):
        if isinstance(init, Profile):
            c = SolverConfig(**{**cfg.to_dict(), "init": "custom-profile",
                                "normalization": "unit-minus-alpha-moment"},
                             custom_profile=init)
        else:
            c = SolverConfig(**{**cfg.to_dict(), "init": init,
                                "normalization": "unit-minus-alpha-moment"})
        try:
            prof, rep = solve(spec, c, grid)
        except CoagScaleError as exc:
            return None, None, exc.code
        return prof, rep, "converged" if rep.converged else "not-converged"

    workers = min(len(inits), thread_count())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, inits))
    else:
        results = [one(i) for i in inits]

    k = len(inits)
    dist = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(k):
            pi, pj = results[i][0], results[j][0]
            if pi is not None and pj is not None:
                dist[i, j] = 0.0 if i == j else l1_distance(pi, pj, weight="solver")
    status = [r[2] for r in results]
    if all(s == "converged" for s in status):
        off = dist[~np.eye(k, dtype=bool)]
        verdict = "unique" if np.all(off <= threshold) else "not-unique"
    else:
        verdict = "inconclusive"
    labels = [i if isinstance(i, str) else "custom-profile" for i in inits]
    return UniquenessResult(labels, dist, status, verdict, threshold,
                            [r[1] for r in results])
