"""Geometric size grid, midpoint quadrature, interpolation and convolution.

The continuous size axis (0, inf) is truncated to [x_min, x_max] and split
into cells whose edges form a geometric progression.  Each cell is
represented by its geometric midpoint and integrated with the midpoint
rule, so non-negative integrands always give non-negative integrals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidBounds, LengthMismatch, OverflowSignal

#: Gauss-Legendre order used for sub-cell quadrature of convolutions.
GAUSS_ORDER = 3


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SizeGrid:
    """Immutable geometric partition of ``[x_min, x_max]``.

    Attributes
    ----------
    edges : ndarray, shape (n_cells + 1,)
        Cell boundaries, ``edges[i + 1] / edges[i]`` constant.
    nodes : ndarray, shape (n_cells,)
        Representative point of each cell (geometric midpoint).
    weights : ndarray, shape (n_cells,)
        Cell widths, used as midpoint quadrature weights.
    """

    edges: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges", _frozen(self.edges))
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(np.diff(self.edges)))

    @property
    def x_min(self) -> float:
        return float(self.edges[0])

    @property
    def x_max(self) -> float:
        return float(self.edges[-1])

    @property
    def n_cells(self) -> int:
        return self.nodes.size

    @property
    def ratio(self) -> float:
        return float((self.x_max / self.x_min) ** (1.0 / self.n_cells))

    @property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.nodes)

    def scaled(self, a: float) -> "SizeGrid":
        """Grid mapped by ``x -> x / a`` (edges and nodes divided by ``a``)."""
        return SizeGrid(edges=self.edges / a, nodes=self.nodes / a)

    def same_as(self, other: "SizeGrid") -> bool:
        return self.n_cells == other.n_cells and bool(
            np.array_equal(self.edges, other.edges)
        )

    def params(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_cells": self.n_cells}


def build_grid(x_min: float, x_max: float, n_cells: int) -> SizeGrid:
    """Build a geometric grid with ``n_cells`` cells on ``[x_min, x_max]``.

    Edges are ``x_min * r**i`` with ``r = (x_max / x_min)**(1 / n_cells)``;
    nodes sit at the geometric cell midpoints.
    """
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or not 0 < x_min < x_max:
        raise InvalidBounds(f"need 0 < x_min < x_max, got {x_min!r}, {x_max!r}")
    if int(n_cells) != n_cells or n_cells < 1:
        raise InvalidBounds(f"n_cells must be a positive integer, got {n_cells!r}")
    n_cells = int(n_cells)
    log_lo, log_hi = np.log(x_min), np.log(x_max)
    k = np.arange(n_cells + 1)
    edges = np.exp(log_lo + (log_hi - log_lo) * k / n_cells)
    # pin the end points exactly
    edges[0], edges[-1] = x_min, x_max
    nodes = np.exp(log_lo + (log_hi - log_lo) * (k[:-1] + 0.5) / n_cells)
    return SizeGrid(edges=edges, nodes=nodes)


def _check_length(grid: SizeGrid, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise LengthMismatch(
            f"expected {grid.n_cells} cell values, got shape {values.shape}"
        )
    return values


def integrate(grid: SizeGrid, values) -> float:
    """Midpoint-rule integral ``sum(values[i] * weights[i])``.

    Summation runs strictly left to right so results are bit-reproducible.
    """
    values = _check_length(grid, values)
    terms = values * grid.weights
    if terms.size == 0:
        return 0.0
    return float(np.cumsum(terms)[-1])


def interpolate(grid: SizeGrid, values, x):
    """Piecewise linear interpolation in ``log x`` between nodes.

    Values are held constant between ``x_min`` and the first node (and
    between the last node and ``x_max``) and are zero outside the grid.
    Accepts scalars or arrays of positive sizes.
    """
    values = _check_length(grid, values)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.interp(np.log(x), grid.log_nodes, values)
    out = np.where((x >= grid.x_min) & (x <= grid.x_max), out, 0.0)
    return float(out) if out.ndim == 0 else out


def _half_intervals(grid: SizeGrid, targets: np.ndarray):
    """Intervals of ``[0, e_0, ..., e_n]`` clipped to ``(0, targets / 2)``."""
    breaks = np.concatenate(([0.0], grid.edges))
    lo = breaks[:-1][None, :]
    hi = np.minimum(breaks[1:][None, :], 0.5 * targets[:, None])
    width = np.clip(hi - lo, 0.0, None)
    return lo, width


def convolve(
    grid: SizeGrid,
    f,
    g: Callable[[np.ndarray], np.ndarray],
    g_limit: float | None = None,
    targets=None,
    order: int = GAUSS_ORDER,
) -> np.ndarray:
    """Convolution ``(f*g)(x) = int_0^x f(y) g(x - y) dy`` at the nodes.

    ``f`` is given by its node values and evaluated off-node with
    :func:`interpolate` (so it vanishes below ``x_min``); ``g`` is a callable
    evaluated directly, except for arguments below ``x_min`` where the
    supplied small-size limit ``g_limit`` is used (default ``g(x_min)``).

    The integral is split at ``x / 2`` into
    ``int_0^{x/2} f(y) g(x-y) dy + int_0^{x/2} f(x-y) g(y) dy`` so that the
    fine cells near zero resolve whichever factor is evaluated at small
    arguments.  Each grid cell clipped to ``(0, x/2)`` is integrated with
    Gauss-Legendre quadrature of the given order.
    """
    f = _check_length(grid, f)
    x = grid.nodes if targets is None else np.asarray(targets, dtype=float)
    if g_limit is None:
        g_limit = float(np.asarray(g(np.array([grid.x_min])))[0])

    def g_eff(z):
        z = np.asarray(z, dtype=float)
        below = z < grid.x_min
        out = np.asarray(g(np.where(below, grid.x_min, z)), dtype=float)
        return np.where(below, g_limit, out)

    t, wq = np.polynomial.legendre.leggauss(order)
    lo, width = _half_intervals(grid, x)
    total = np.zeros(x.size)
    with np.errstate(over="raise", invalid="raise"):
        try:
            for tk, wk in zip(t, wq):
                y = lo + 0.5 * width * (tk + 1.0)
                y = np.where(width > 0, y, 0.5 * x[:, None])
                z = x[:, None] - y
                term = f_at(grid, f, y) * g_eff(z) + f_at(grid, f, z) * g_eff(y)
                total += (0.5 * wk) * np.sum(width * term, axis=1)
        except FloatingPointError as exc:
            raise OverflowSignal(f"non-finite value in convolution: {exc}") from exc
    if not np.all(np.isfinite(total)):
        raise OverflowSignal("non-finite value in convolution")
    return total


def f_at(grid: SizeGrid, f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`interpolate` without the length check."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.interp(np.log(np.maximum(x, 1e-300)), grid.log_nodes, f)
    return np.where((x >= grid.x_min) & (x <= grid.x_max), out, 0.0)


def log_derivative(grid: SizeGrid, values) -> np.ndarray:
    """``x d/dx`` of node values by finite differences in ``log x``.

    Centered in the interior, one-sided first order at the two ends.
    """
    values = _check_length(grid, values)
    if grid.n_cells < 2:
        return np.zeros_like(values)
    return np.gradient(values, grid.log_nodes, edge_order=1)
