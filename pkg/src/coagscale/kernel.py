"""Inverse power law coagulation kernel ``K(x, y) = 2 (x y)**(-alpha)``."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class KernelSpec:
    """Kernel exponent ``alpha``, self-similar speed ``w`` and mass ``rho``.

    ``alpha = 0`` is the constant kernel ``K = 2``, kept as an exactly
    solvable baseline.
    """

    alpha: float
    w: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha!r}")
        if not np.isfinite(self.w) or self.w <= 0:
            raise DomainError(f"w must be > 0, got {self.w!r}")
        if not np.isfinite(self.rho) or self.rho <= 0:
            raise DomainError(f"rho must be > 0, got {self.rho!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def eval_kernel(spec: KernelSpec, x, x_star):
    """Coagulation rate ``2 (x x_star)**(-alpha)``; symmetric in its arguments."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if np.any(x <= 0) or np.any(x_star <= 0):
        raise DomainError("kernel sizes must be positive")
    out = 2.0 * (x * x_star) ** (-spec.alpha)
    return float(out) if out.ndim == 0 else out


def homogeneity(spec: KernelSpec) -> float:
    """Degree ``lambda = -2 alpha`` with ``K(s x, s y) = s**lambda K(x, y)``."""
    return -2.0 * spec.alpha


def mean_size_sigma(spec: KernelSpec, t):
    """Mean size ``(1 + w (1 - lambda) t)**(1 / (1 - lambda))`` of the self-similar solution."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    one_minus_lambda = 1.0 - homogeneity(spec)
    out = (1.0 + spec.w * one_minus_lambda * t) ** (1.0 / one_minus_lambda)
    return float(out) if out.ndim == 0 else out
