"""Scaling profiles, their moments, the scaling action and residual checks.

A profile ``phi`` is stored by its values at the nodes of a
:class:`~coagscale.grid.SizeGrid`.  The residuals evaluate, node by node,
the left-hand sides of four equivalent forms of the profile equation:

``A7``
    ``w (x phi' + 2 phi) + (h*h) - 2 x**(-alpha) M_{-alpha} phi``
``B3``
    ``w x**(1+alpha) h' + w (alpha+2) x**alpha h + h*h - 2 M_0(h) h``
``B2``
    ``w x**(1+alpha) H' + w x**alpha H + alpha w int_x^inf y**(alpha-1) H dy
    + h*H - M_0(h) H``
``B00``
    ``w x**2 phi - J(x)`` with the coagulation mass flux ``J``.

Here ``h = phi / x**alpha`` and ``H(x) = int_x^inf h``.  Below ``x_min``
the profile (and so ``h``) is taken to be zero, hence ``H`` is constant
there.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AlphaZero, DomainError, LengthMismatch, OverflowSignal
from .flux import flux_operator
from .grid import SizeGrid, convolve, f_at, integrate, log_derivative
from .kernel import KernelSpec

EQUATIONS = ("A7", "B3", "B2", "B00")


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Profile:
    """Non-negative node values of a candidate profile on a size grid."""

    grid: SizeGrid
    values: np.ndarray
    spec: KernelSpec

    def __post_init__(self):
        values = _readonly(self.values)
        if values.shape != (self.grid.n_cells,):
            raise LengthMismatch(
                f"expected {self.grid.n_cells} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("profile values must be finite")
        if np.any(values < 0):
            raise DomainError("profile values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def alpha(self) -> float:
        return self.spec.alpha

    @cached_property
    def moments(self) -> dict:
        """``{m_minus_alpha, m0, m1}``."""
        return {
            "m_minus_alpha": moment(self, -self.alpha),
            "m0": moment(self, 0.0),
            "m1": moment(self, 1.0),
        }

    def with_values(self, values) -> "Profile":
        return Profile(self.grid, values, self.spec)


@dataclass(frozen=True, eq=False)
class TransformPair:
    """``h = phi / x**alpha`` and ``H(x) = int_x^{x_max} h`` at the nodes.

    ``H_min`` is ``H(x_min)``; ``H(x_max) = 0`` by construction.
    """

    h_values: np.ndarray
    H_values: np.ndarray
    H_min: float


def moment(p: Profile, m: float) -> float:
    """``M_m = int x**m phi dx`` by the midpoint rule."""
    x = p.grid.nodes
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        terms = np.where(p.values > 0, x**m * p.values, 0.0)
    if not np.all(np.isfinite(terms)):
        raise OverflowSignal(f"moment of order {m} overflows on this grid")
    out = integrate(p.grid, terms)
    if not np.isfinite(out):
        raise OverflowSignal(f"moment of order {m} overflows on this grid")
    return out


def scale(p: Profile, a: float) -> Profile:
    """The profile ``a**(1 - 2 alpha) phi(a x)``, realised on the grid ``x / a``.

    Node values are only multiplied, so every moment obeys
    ``M_m -> a**(-m - 2 alpha) M_m`` up to roundoff.
    """
    if not a > 0:
        raise DomainError(f"scale factor must be positive, got {a!r}")
    if a == 1.0:
        return p
    return Profile(p.grid.scaled(a), p.values * a ** (1.0 - 2.0 * p.alpha), p.spec)


def _tail_trapezoid(grid: SizeGrid, values: np.ndarray):
    """``int_{x_i}^{x_max} v`` at every node, accumulated right to left.

    Trapezoidal between nodes; the half cell above the last node uses the
    last value.  Also returns the integral from ``x_min``.
    """
    x = grid.nodes
    seg = 0.5 * (values[1:] + values[:-1]) * np.diff(x)
    top = values[-1] * (grid.x_max - x[-1])
    pieces = np.concatenate((seg, [top]))
    tail = np.cumsum(pieces[::-1])[::-1]
    lower = tail[0] + values[0] * (x[0] - grid.x_min)
    return tail, float(lower)


def transform_pair(p: Profile) -> TransformPair:
    """``h`` and ``H`` of a profile (see module docstring)."""
    h = p.values * p.grid.nodes ** (-p.alpha)
    H, H_min = _tail_trapezoid(p.grid, h)
    return TransformPair(_readonly(h), _readonly(H), H_min)


def _interp_callable(grid: SizeGrid, values: np.ndarray):
    return lambda z: f_at(grid, values, z)


def _residual_a7(p: Profile) -> np.ndarray:
    g, x, phi = p.grid, p.grid.nodes, p.values
    w, alpha = p.spec.w, p.alpha
    h = phi * x ** (-alpha)
    gain = convolve(g, h, _interp_callable(g, h), g_limit=0.0)
    loss = 2.0 * x ** (-alpha) * moment(p, -alpha) * phi
    return w * (log_derivative(g, phi) + 2.0 * phi) + gain - loss


def _residual_b3(p: Profile) -> np.ndarray:
    g, x = p.grid, p.grid.nodes
    w, alpha = p.spec.w, p.alpha
    h = p.values * x ** (-alpha)
    hh = convolve(g, h, _interp_callable(g, h), g_limit=0.0)
    m0h = integrate(g, h)
    return (w * x**alpha * log_derivative(g, h) + w * (alpha + 2.0) * x**alpha * h
            + hh - 2.0 * m0h * h)


def _residual_b2(p: Profile) -> np.ndarray:
    g, x = p.grid, p.grid.nodes
    w, alpha = p.spec.w, p.alpha
    tp = transform_pair(p)
    h, H = np.asarray(tp.h_values), np.asarray(tp.H_values)
    hH = convolve(g, h, _interp_callable(g, H), g_limit=tp.H_min)
    if alpha > 0:
        inner, _ = _tail_trapezoid(g, x ** (alpha - 1.0) * H)
        tail_term = alpha * w * inner
    else:
        tail_term = 0.0
    m0h = integrate(g, h)
    # H' = -h exactly
    return -w * x * p.values + w * x**alpha * H + tail_term + hH - m0h * H


def _residual_b00(p: Profile) -> np.ndarray:
    x = p.grid.nodes
    op = flux_operator(p.grid, p.alpha, "nodes", lower_extension=True)
    return p.spec.w * x**2 * p.values - op(p.values)


_RESIDUALS = {
    "A7": _residual_a7,
    "B3": _residual_b3,
    "B2": _residual_b2,
    "B00": _residual_b00,
}


def residual(p: Profile, which: str) -> np.ndarray:
    """Per-node residual of one form of the profile equation.

    Parameters
    ----------
    p : Profile
    which : {"A7", "B3", "B2", "B00"}

    Returns
    -------
    ndarray
        Left-hand side at every node; zero for an exact profile up to
        discretisation error.
    """
    try:
        fn = _RESIDUALS[which]
    except KeyError:
        raise ValueError(f"unknown equation {which!r}; expected one of {EQUATIONS}") from None
    if p.grid.n_cells < 2 or not np.any(p.values):
        return np.zeros(p.grid.n_cells)
    return fn(p)


def residual_norms(p: Profile) -> dict:
    """Sup norm of every residual."""
    return {eq: float(np.max(np.abs(residual(p, eq)))) for eq in EQUATIONS}


def moment_identity_gap(p: Profile) -> float:
    """``w M_0 - M_{-alpha}**2``; zero for an exact profile."""
    return p.spec.w * moment(p, 0.0) - moment(p, -p.alpha) ** 2


def b99_gap(p: Profile) -> float:
    """``M_{alpha-1}(H) - M_0 / alpha``.

    The identity follows from integration by parts alone, so it holds for
    every profile and measures quadrature consistency.  ``H`` equals
    ``H(x_min)`` below the grid, which contributes
    ``H(x_min) x_min**alpha / alpha``.
    """
    alpha = p.alpha
    if alpha == 0:
        raise AlphaZero("the M_{alpha-1}(H) identity is undefined at alpha = 0")
    tp = transform_pair(p)
    x = p.grid.nodes
    m_h = integrate(p.grid, x ** (alpha - 1.0) * tp.H_values)
    m_h += tp.H_min * p.grid.x_min**alpha / alpha
    return m_h - moment(p, 0.0) / alpha


def truncation_report(p: Profile) -> dict:
    """How much the answer depends on cutting ``(0, inf)`` to ``[x_min, x_max]``.

    Returns
    -------
    dict
        ``lower_extension`` : sup change of the flux when the profile below
        ``x_min`` is taken as its first node value instead of zero, relative
        to the sup of the flux.
        ``first_decade_mass`` and ``last_decade_mass`` : share of ``M_1``
        within a factor 10 of either end.
        ``nested_moments`` : relative change of ``M_{-alpha}``, ``M_0`` and
        ``M_1`` when the domain shrinks by a factor 10 at both ends.
    """
    g, x, v = p.grid, p.grid.nodes, np.asarray(p.values)
    with_ext = flux_operator(g, p.alpha, "nodes", lower_extension=True)(v)
    without = flux_operator(g, p.alpha, "nodes", lower_extension=False)(v)
    top = float(np.max(np.abs(with_ext)))
    lower = float(np.max(np.abs(with_ext - without))) / top if top > 0 else 0.0
    m1 = moment(p, 1.0)
    low = x < 10.0 * g.x_min
    high = x > g.x_max / 10.0

    def share(mask):
        return integrate(g, np.where(mask, x * v, 0.0)) / m1 if m1 > 0 else 0.0

    inner = ~(low | high)
    nested = {}
    for key, m in (("m_minus_alpha", -p.alpha), ("m0", 0.0), ("m1", 1.0)):
        full = moment(p, m)
        part = integrate(g, np.where(inner, x**m * v, 0.0))
        nested[key] = (full - part) / full if full > 0 else 0.0
    return {"lower_extension": lower, "first_decade_mass": share(low),
            "last_decade_mass": share(high), "nested_moments": nested}


def l1_distance(p: Profile, q: Profile, weight: str = "x") -> float:
    """``int weight |p - q| dx`` on the grid of ``p`` (``q`` interpolated).

    ``weight`` is ``"x"`` for ``x dx`` or ``"solver"`` for
    ``(x**(-alpha) + x) dx``.
    """
    x = p.grid.nodes
    qv = q.values if q.grid.same_as(p.grid) else f_at(q.grid, np.asarray(q.values), x)
    wgt = x if weight == "x" else x ** (-p.alpha) + x
    return integrate(p.grid, wgt * np.abs(p.values - qv))
