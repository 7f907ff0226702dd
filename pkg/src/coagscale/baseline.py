"""Exact constant-kernel profile and its Bernstein transform.

For ``K = 2`` the profiles are ``(w**2 / rho) exp(-w x / rho)`` and the
Bernstein transform ``B(xi) = int (1 - exp(-x xi)) phi dx`` satisfies

    w xi B'(xi) + B**2 - w B = 0,

solved by ``B = w xi / (xi + w / rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TooFewPoints
from .grid import SizeGrid
from .kernel import KernelSpec
from .profile import Profile


@dataclass(frozen=True, eq=False)
class BernsteinSamples:
    """Transform values ``B(xi)`` at positive, increasing ``xi``."""

    xi: np.ndarray
    values: np.ndarray


def default_xi(n: int = 200, lo: float = 1e-2, hi: float = 1e3) -> np.ndarray:
    """Log-uniform sample points."""
    return np.logspace(np.log10(lo), np.log10(hi), n)


def explicit_profile(w: float, rho: float, grid: SizeGrid) -> Profile:
    """``(w**2 / rho) exp(-w x / rho)`` at the nodes, tagged ``alpha = 0``."""
    spec = KernelSpec(alpha=0.0, w=w, rho=rho)
    return Profile(grid, (w * w / rho) * np.exp(-w * grid.nodes / rho), spec)


def analytic_transform(w: float, rho: float, xi) -> np.ndarray:
    """``w xi / (xi + w / rho)``."""
    xi = np.asarray(xi, dtype=float)
    return w * xi / (xi + w / rho)


def bernstein_transform(p: Profile, xi) -> BernsteinSamples:
    """Quadrature of ``(1 - exp(-x xi)) phi(x)`` for every ``xi``.

    Uses the trapezoidal rule in ``log x`` over the nodes, which converges
    faster than any power of the spacing for integrands that decay at both
    ends of the grid.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(~np.isfinite(xi)) or np.any(xi <= 0):
        raise DomainError("xi must be positive")
    x = p.grid.nodes
    s = np.log(x)
    ds = np.gradient(s) if x.size > 1 else np.array([np.log(p.grid.ratio)])
    weights = x * ds
    integrand = -np.expm1(-np.outer(xi, x)) * (np.asarray(p.values) * weights)[None, :]
    values = np.cumsum(integrand, axis=1)[:, -1] if x.size else np.zeros(xi.size)
    return BernsteinSamples(xi=xi, values=values)


def log_derivative_4(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``dy/ds`` by five-point finite differences.

    Fourth order on uniformly spaced ``s``: centred in the interior,
    off-centre at the two points nearest each end.  Falls back to
    :func:`numpy.gradient` (second order) for non-uniform spacing or fewer
    than five points.
    """
    steps = np.diff(s)
    if y.size < 5 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return np.gradient(y, s, edge_order=1 if y.size < 3 else 2)
    h = steps[0]
    d = np.empty_like(y, dtype=float)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12.0 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12.0 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12.0 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12.0 * h)
    return d


def bernstein_ode_residual(samples: BernsteinSamples, w: float) -> np.ndarray:
    """``w xi B' + B**2 - w B`` at every sample, with ``xi B'`` taken in ``log xi``."""
    xi = np.asarray(samples.xi, dtype=float)
    b = np.asarray(samples.values, dtype=float)
    if xi.size < 3:
        raise TooFewPoints("need at least 3 samples to differentiate")
    xb = log_derivative_4(np.log(xi), b)
    return w * xb + b * b - w * b
