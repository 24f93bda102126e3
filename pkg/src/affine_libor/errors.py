"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: validation/parse problems exit 1,
calibration infeasibility exits 2, infeasible damping exits 3.
"""
from __future__ import annotations


class ParameterError(ValueError):
    """A model parameter violates its admissible range."""


class ValidationError(ValueError):
    """Input data (curves, grids, configs) violates a structural invariant."""


class DomainError(ValueError):
    """An exponent argument lies outside the finite-moment domain.

    Attributes:
        u_max: supremum of the admissible scalar argument, when known.
        component: index of the offending driver component, when known.
    """

    def __init__(self, message: str, u_max: float | None = None,
                 component: int | None = None):
        super().__init__(message)
        self.u_max = u_max
        self.component = component


class DampingError(DomainError):
    """Requested damping vector puts the MGF outside its domain.

    Attributes:
        suggestion: a feasible damping vector, if one was found.
    """

    def __init__(self, message: str, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class CalibrationError(RuntimeError):
    """A curve target is unreachable by the driving process.

    Attributes:
        attained: best moment value reached while bracketing.
        target: the unreachable target.
    """

    def __init__(self, message: str, attained: float | None = None,
                 target: float | None = None):
        super().__init__(message)
        self.attained = attained
        self.target = target


class AssemblyError(RuntimeError):
    """A calibrated-model invariant failed during assembly."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or to meet its tolerance."""
