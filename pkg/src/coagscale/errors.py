"""Exception hierarchy shared by all coagscale modules.

Every error carries a short machine-readable ``code`` so the command line
front-end can emit it as JSON without string matching.
"""
from __future__ import annotations


class CoagScaleError(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidBounds(CoagScaleError, ValueError):
    code = "invalid-bounds"


class LengthMismatch(CoagScaleError, ValueError):
    code = "length-mismatch"


class DomainError(CoagScaleError, ValueError):
    code = "domain-error"


class OverflowSignal(CoagScaleError, FloatingPointError):
    code = "overflow"


class AlphaZero(CoagScaleError, ValueError):
    code = "alpha-zero"


class NonPositiveMoment(CoagScaleError, ValueError):
    code = "nonpositive-moment"


class NonPositiveMass(CoagScaleError, ValueError):
    code = "nonpositive-mass"


class DegenerateInput(CoagScaleError, ValueError):
    code = "degenerate-input"


class CollapseToZero(CoagScaleError, ArithmeticError):
    code = "collapse-to-zero"


class TooFewPoints(CoagScaleError, ValueError):
    code = "too-few-points"


class Stagnation(CoagScaleError, ArithmeticError):
    code = "stagnation"


class ManifestError(CoagScaleError, ValueError):
    code = "invalid-manifest"
