"""Model quantities implied by a calibrated model.

Everything here is a pure function of (model, state, time, index): LIBOR and
defaultable LIBOR rates, forward default intensities, the survival factor,
the tenor-date hazard, aggregate bond-reconstruction coefficients, and the
affine exponents of the driver under forward and restricted defaultable
forward measures.  States may be single vectors (d,) or path batches
(..., d); results broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import ExponentPair, product_exponents
from .calibration import CalibratedModel

__all__ = [
    "RateCoefficients",
    "rate_coefficients",
    "libor",
    "defaultable_libor",
    "default_intensity",
    "survival_process",
    "hazard_at_tenor",
    "spread",
    "forward_measure_exponents",
    "restricted_forward_exponents",
    "forward_moment",
    "aggregate_coefficients",
]


@dataclass(frozen=True)
class RateCoefficients:
    """Affine coefficients (A, B) of a log bond-price ratio."""

    A: float
    B: np.ndarray

    def __post_init__(self):
        b = np.array(self.B, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "B", b)

    def exp_affine(self, x: np.ndarray):
        """exp(A + <B, x>) for a state or batch of states."""
        x = np.asarray(x, dtype=float)
        return np.exp(self.A + x @ self.B)


def _pair_coefficients(model: CalibratedModel, p: np.ndarray, q: np.ndarray,
                       t: float) -> RateCoefficients:
    """A_{T_N - t}(p, q) = phi(p) - phi(q) and the matching psi difference."""
    s = model.grid.terminal - t
    ep = product_exponents(model.driver, p, s)
    eq = product_exponents(model.driver, q, s)
    return RateCoefficients(A=float(ep.phi - eq.phi), B=ep.psi - eq.psi)


def _check_rate_index(model: CalibratedModel, k: int, t: float,
                      lowest: int = 1) -> None:
    if not lowest <= k <= model.n - 1:
        raise IndexError(f"rate index {k} outside {lowest}..{model.n - 1}")
    if not 0 <= t <= model.grid.date(k) + 1e-12:
        raise ValueError(f"need 0 <= t <= T_{k} = {model.grid.date(k):g}")


def rate_coefficients(model: CalibratedModel, k: int, t: float,
                      defaultable: bool = False) -> RateCoefficients:
    """Coefficients of 1 + delta_k L(t,T_k) (or the defaultable analogue)."""
    _check_rate_index(model, k, t)
    if defaultable:
        return _pair_coefficients(model, model.v(k), model.v(k + 1), t)
    return _pair_coefficients(model, model.u(k), model.u(k + 1), t)


def libor(model: CalibratedModel, x, t: float, k: int):
    """Forward LIBOR rate L(t,T_k) at state x; non-negative for x >= 0."""
    coeff = rate_coefficients(model, k, t)
    return (coeff.exp_affine(x) - 1.0) / model.grid.delta(k)


def defaultable_libor(model: CalibratedModel, x, t: float, k: int):
    """Defaultable forward LIBOR rate Lbar(t,T_k) at state x."""
    coeff = rate_coefficients(model, k, t, defaultable=True)
    return (coeff.exp_affine(x) - 1.0) / model.grid.delta(k)


def intensity_coefficients(model: CalibratedModel, k: int,
                           t: float) -> RateCoefficients:
    """Coefficients of 1 + delta_k H(t,T_k).

    The k = 0 factor uses the zero sentinel, so it reduces to the inverse of
    the first survival factor.
    """
    if not 0 <= k <= model.n - 1:
        raise IndexError(f"intensity index {k} outside 0..{model.n - 1}")
    if not 0 <= t <= model.grid.date(k) + 1e-12:
        raise ValueError(f"need 0 <= t <= T_{k} = {model.grid.date(k):g}")
    s = model.grid.terminal - t
    ev_k = product_exponents(model.driver, model.v(k), s)
    eu_k = product_exponents(model.driver, model.u(k), s)
    ev_k1 = product_exponents(model.driver, model.v(k + 1), s)
    eu_k1 = product_exponents(model.driver, model.u(k + 1), s)
    a = float(ev_k.phi - eu_k.phi + eu_k1.phi - ev_k1.phi)
    b = ev_k.psi - eu_k.psi + eu_k1.psi - ev_k1.psi
    return RateCoefficients(A=a, B=b)


def default_intensity(model: CalibratedModel, x, t: float, k: int):
    """Forward default intensity H(t,T_k) >= 0, for k = 0..N-1."""
    coeff = intensity_coefficients(model, k, t)
    return (coeff.exp_affine(x) - 1.0) / model.grid.delta(k)


def survival_process(model: CalibratedModel, x, t: float, k: int):
    """Survival factor at (t, x) for tenor index k = 0..N-1; lies in [0, 1].

    Callers running past T_k are expected to freeze the value at its own
    tenor date.
    """
    if not 0 <= k <= model.n - 1:
        raise IndexError(f"survival index {k} outside 0..{model.n - 1}")
    if not 0 <= t <= model.grid.date(k) + 1e-12:
        raise ValueError(f"need 0 <= t <= T_{k} = {model.grid.date(k):g}")
    coeff = _pair_coefficients(model, model.v(k + 1), model.u(k + 1), t)
    return coeff.exp_affine(x)


def hazard_coefficients(model: CalibratedModel, k: int) -> RateCoefficients:
    """Affine map X_{T_k} -> hazard value at T_{k+1}, for k = 0..N-1."""
    if not 0 <= k <= model.n - 1:
        raise IndexError(f"hazard index {k} outside 0..{model.n - 1}")
    return _pair_coefficients(model, model.u(k + 1), model.v(k + 1),
                              model.grid.date(k))


def hazard_at_tenor(model: CalibratedModel, x_at_tk, k: int):
    """Hazard value at T_{k+1} as an affine transform of X_{T_k}.

    Equals -log(survival_process evaluated at (T_k, X_{T_k})); non-negative
    because u_{k+1} >= v_{k+1}.
    """
    coeff = hazard_coefficients(model, k)
    x = np.asarray(x_at_tk, dtype=float)
    return coeff.A + x @ coeff.B


def spread(model: CalibratedModel, x, t: float, k: int):
    """Forward credit spread S(t,T_k) = Lbar(t,T_k) - L(t,T_k) >= 0."""
    return defaultable_libor(model, x, t, k) - libor(model, x, t, k)


def _shifted_exponents(model: CalibratedModel, base: np.ndarray, w,
                       t: float) -> ExponentPair:
    s = model.grid.terminal - t
    shift = product_exponents(model.driver, base, s).psi
    e_shift = product_exponents(model.driver, shift, t)
    w = np.asarray(w)
    e_full = product_exponents(model.driver, shift + w, t)
    return ExponentPair(e_full.phi - e_shift.phi, e_full.psi - e_shift.psi)


def forward_measure_exponents(model: CalibratedModel, k: int, v,
                              t: float) -> ExponentPair:
    """Exponents of X_t under the forward measure with numeraire date T_k.

    E_k[exp(<v, X_t>)] = exp(phi + <psi, x0>) for the returned pair; ``v``
    may be a (possibly complex) vector or batch of vectors.
    """
    if not 1 <= k <= model.n:
        raise IndexError(f"measure index {k} outside 1..{model.n}")
    return _shifted_exponents(model, model.u(k), v, t)


def restricted_forward_exponents(model: CalibratedModel, k: int, w,
                                 t: float) -> ExponentPair:
    """Exponents of X_t under the restricted defaultable forward measure."""
    if not 1 <= k <= model.n:
        raise IndexError(f"measure index {k} outside 1..{model.n}")
    return _shifted_exponents(model, model.v(k), w, t)


def forward_moment(model: CalibratedModel, k: int, v, t: float,
                   restricted: bool = False):
    """E[exp(<v, X_t>)] under the (restricted) forward measure for date T_k."""
    if restricted:
        pair = restricted_forward_exponents(model, k, v, t)
    else:
        pair = forward_measure_exponents(model, k, v, t)
    return np.exp(pair.phi + np.asarray(pair.psi) @ model.x0)


def aggregate_coefficients(model: CalibratedModel, i: int, m: int,
                           defaultable: bool = False) -> RateCoefficients:
    """Coefficients reconstructing the T_i-value of a T_m bond from X_{T_i}.

    exp(A + <B, X_{T_i}>) equals the product of inverse one-period forward
    prices between T_i and T_m, which telescopes to a single exponent
    difference.
    """
    if not 1 <= i < m <= model.n:
        raise IndexError(f"need 1 <= i < m <= {model.n}, got i={i}, m={m}")
    seq = model.v if defaultable else model.u
    return _pair_coefficients(model, seq(m), seq(i), model.grid.date(i))
