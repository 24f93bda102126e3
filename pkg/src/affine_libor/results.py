"""Shared result containers for the pricing routines."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PriceEstimate:
    """A price with its method tag and the matching error measure.

    method is one of 'closed-form', 'fourier' or 'mc'; Monte Carlo
    estimates carry a standard error, Fourier prices a quadrature error
    estimate.
    """

    value: float
    method: str
    std_error: float | None = None
    quadrature_error: float | None = None

    def as_dict(self) -> dict:
        out = {"value": self.value, "method": self.method}
        if self.std_error is not None:
            out["standard_error"] = self.std_error
        if self.quadrature_error is not None:
            out["quadrature_error"] = self.quadrature_error
        return out


@dataclass(frozen=True)
class CdsMcResult:
    """Monte Carlo CDS decomposition: fee leg per unit spread, protection
    leg value, and the implied fair spread."""

    fee_leg: float
    protection_leg: PriceEstimate
    spread: PriceEstimate
