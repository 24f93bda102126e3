"""Affine exponent engine for products of independent square-root factors.

Each scalar factor follows a mean-reverting square-root diffusion with
compound-Poisson jumps (exponential marks),

    dX = -lam * (X - theta) dt + 2 * eta * sqrt(X) dW + dZ,

whose exponential moments E[exp(u * X_t)] = exp(phi_t(u) + psi_t(u) * x) are
available in closed form.  The product process stacks independent factors, so
phi adds across components and psi acts componentwise.

Closed forms (with a(t) = exp(-lam*t), b(t) = (1 - exp(-lam*t)) / lam):

    psi_t(u) = a(t) * u / (1 - 2 eta^2 b(t) u)
    phi_t(u) = -(lam*theta / (2 eta^2)) * log(1 - 2 eta^2 b(t) u)   [diffusion]
             + (ell*mu / (lam*mu - 2 eta^2)) * log(D(t)/D(0))       [jumps]

with D(s) = 1 - (2 eta^2 b(s) + mu a(s)) u and D(0) = 1 - mu u.  Degenerate
parameter sets (lam = 0, eta = 0, ell = 0, lam*mu = 2 eta^2) use the exact
limit formulas rather than parameter perturbation.

All evaluators accept real or complex arguments; for complex u the principal
branch of each logarithm is taken and finiteness is governed by the real part,
which must satisfy Re(u) < component_domain_bound(spec, horizon).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError, ParameterError

__all__ = [
    "AffineComponentSpec",
    "ProductAffineSpec",
    "ExponentPair",
    "component_domain_bound",
    "exponents_analytic",
    "exponents_ode",
    "product_exponents",
    "martingale_value",
    "gamma_x_lower_bound",
]

ODE_ATOL = 1e-12
ODE_RTOL = 1e-10


class ExponentPair(NamedTuple):
    """A value (phi, psi) of the affine exponents at fixed (t, u)."""

    phi: float | complex | np.ndarray
    psi: float | complex | np.ndarray


@dataclass(frozen=True)
class AffineComponentSpec:
    """Parameters of one scalar square-root factor with jumps.

    Args:
        lam: mean-reversion speed, >= 0 (1/time).
        theta: mean-reversion level, >= 0.
        eta: volatility scale, >= 0 (diffusion coefficient is 2*eta*sqrt(x)).
        ell: jump intensity, >= 0 (1/time).
        mu: mean jump size; must be > 0 whenever ell > 0.
        x0: initial state, >= 0.
    """

    lam: float
    theta: float
    eta: float
    ell: float = 0.0
    mu: float = 0.0
    x0: float = 1.0

    def __post_init__(self):
        vals = (self.lam, self.theta, self.eta, self.ell, self.mu, self.x0)
        if not all(np.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite parameter in {vals}")
        if min(self.lam, self.theta, self.eta, self.ell, self.x0) < 0:
            raise ParameterError(
                "lam, theta, eta, ell and x0 must be non-negative")
        if self.ell > 0 and self.mu <= 0:
            raise ParameterError("mu must be positive when ell > 0")
        if self.mu < 0:
            raise ParameterError("mu must be non-negative")


@dataclass(frozen=True)
class ProductAffineSpec:
    """Ordered independent factors split into a risk-free and a spread block.

    The first ``d1`` components drive default-free rates, the remaining ``d2``
    drive the credit spread.  Both blocks must be non-empty.
    """

    components: tuple[AffineComponentSpec, ...]
    d1: int
    d2: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.d1 < 1 or self.d2 < 1:
            raise ParameterError("need d1 >= 1 and d2 >= 1")
        if self.d1 + self.d2 != len(self.components):
            raise ParameterError(
                f"d1 + d2 = {self.d1 + self.d2} != "
                f"{len(self.components)} components")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def x0(self) -> np.ndarray:
        return np.array([c.x0 for c in self.components])

    def risk_free_indices(self) -> range:
        return range(self.d1)

    def spread_indices(self) -> range:
        return range(self.d1, self.d)


def _ab(lam: float, t: float) -> tuple[float, float]:
    """a(t) = exp(-lam t) and b(t) = (1 - exp(-lam t))/lam, with lam=0 limits."""
    if lam == 0.0:
        return 1.0, float(t)
    a = np.exp(-lam * t)
    b = -np.expm1(-lam * t) / lam
    return float(a), float(b)


def component_domain_bound(spec: AffineComponentSpec, horizon: float) -> float:
    """Supremum of real u with finite exponents up to ``horizon``.

    For the closed forms this is the smallest positive singularity: the zero
    of the diffusion log-argument, the jump-mark singularity 1/mu, and the
    zero of the jump log-argument at the horizon.  Returns +inf when no
    singularity exists (eta = 0 and ell = 0).
    """
    if horizon <= 0:
        raise ParameterError("horizon must be positive")
    a, b = _ab(spec.lam, horizon)
    bounds = []
    if spec.eta > 0:
        bounds.append(1.0 / (2.0 * spec.eta**2 * b))
    if spec.ell > 0:
        bounds.append(1.0 / spec.mu)
        bounds.append(1.0 / (2.0 * spec.eta**2 * b + spec.mu * a))
    return min(bounds) if bounds else np.inf


def _check_component_domain(spec, u, t, component=None):
    """Raise DomainError unless Re(u) < domain bound (vectorized)."""
    if t == 0:
        return
    bound = component_domain_bound(spec, t)
    re = np.real(np.asarray(u))
    if np.any(re >= bound):
        where = "" if component is None else f" (component {component})"
        raise DomainError(
            f"argument Re(u)={np.max(re):g} outside exponent domain "
            f"u < {bound:g} at horizon {t:g}{where}",
            u_max=float(bound), component=component)


def _component_exponents_raw(spec: AffineComponentSpec, u, t: float):
    """phi_t(u), psi_t(u) for one factor; no domain checks, broadcasts over u."""
    u = np.asarray(u)
    a, b = _ab(spec.lam, t)
    two_eta2 = 2.0 * spec.eta**2
    denom = 1.0 - two_eta2 * b * u
    psi = a * u / denom

    if spec.eta > 0:
        phi = -(spec.lam * spec.theta / two_eta2) * np.log(denom)
    else:
        phi = spec.lam * spec.theta * b * u
    phi = np.asarray(phi, dtype=u.dtype if np.iscomplexobj(u) else float)

    if spec.ell > 0:
        disc = spec.lam * spec.mu - two_eta2
        d0 = 1.0 - spec.mu * u
        if disc != 0.0:
            # D(t)/D(0) = 1 + u*b*disc/D(0); log1p keeps precision near 0
            phi = phi + (spec.ell * spec.mu / disc) * np.log1p(u * b * disc / d0)
        else:
            phi = phi + spec.ell * spec.mu * u * b / d0
    return phi, psi


def exponents_analytic(spec: AffineComponentSpec, u, t: float) -> ExponentPair:
    """Closed-form (phi_t(u), psi_t(u)) for one factor.

    ``u`` may be a scalar or array, real or complex; complex arguments are
    admissible whenever their real part is.

    Raises:
        DomainError: if Re(u) is at or beyond the finite-moment bound.
    """
    if t < 0:
        raise ParameterError("t must be non-negative")
    _check_component_domain(spec, u, t)
    scalar = np.ndim(u) == 0
    is_complex = np.iscomplexobj(np.asarray(u))
    if t == 0:
        u_arr = np.asarray(u)
        if scalar:
            return ExponentPair(0.0, complex(u) if is_complex else float(u))
        return ExponentPair(np.zeros(u_arr.shape), u_arr.copy())
    phi, psi = _component_exponents_raw(spec, u, t)
    if scalar:
        phi, psi = complex(phi), complex(psi)
        if not is_complex:
            phi, psi = phi.real, psi.real
    return ExponentPair(phi, psi)


def _riccati_F(spec: AffineComponentSpec, psi: float) -> float:
    out = spec.lam * spec.theta * psi
    if spec.ell > 0:
        out += spec.ell * psi / (1.0 / spec.mu - psi)
    return out


def _riccati_R(spec: AffineComponentSpec, psi: float) -> float:
    return 2.0 * spec.eta**2 * psi**2 - spec.lam * psi


def exponents_ode(spec: AffineComponentSpec, u: float, t: float) -> ExponentPair:
    """(phi_t(u), psi_t(u)) by integrating phi' = F(psi), psi' = R(psi).

    Serves as an independent cross-check of the closed forms; real u only.
    An adaptive embedded Runge-Kutta 4(5) pair is used with atol=1e-12,
    rtol=1e-10; step-size collapse near a singularity is reported as a
    domain error.
    """
    if t < 0:
        raise ParameterError("t must be non-negative")
    u = float(u)
    _check_component_domain(spec, u, t)
    if t == 0:
        return ExponentPair(0.0, u)

    def rhs(_, y):
        return [_riccati_F(spec, y[1]), _riccati_R(spec, y[1])]

    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            sol = solve_ivp(rhs, (0.0, t), [0.0, u], method="RK45",
                            atol=ODE_ATOL, rtol=ODE_RTOL, dense_output=False)
        except FloatingPointError as exc:
            raise DomainError(
                f"Riccati integration blew up for u={u:g}, t={t:g}: {exc}",
                u_max=component_domain_bound(spec, t)) from exc
    if not sol.success:
        msg = sol.message or "integration failed"
        if "step size" in msg.lower():
            raise DomainError(
                f"step rejection near singularity for u={u:g}, t={t:g}: {msg}",
                u_max=component_domain_bound(spec, t))
        raise NumericalError(f"Riccati solver did not converge: {msg}")
    phi, psi = sol.y[0, -1], sol.y[1, -1]
    if not (np.isfinite(phi) and np.isfinite(psi)):
        raise DomainError(
            f"non-finite Riccati solution for u={u:g}, t={t:g}",
            u_max=component_domain_bound(spec, t))
    return ExponentPair(float(phi), float(psi))


def product_exponents(spec: ProductAffineSpec, u, t: float) -> ExponentPair:
    """(phi_t(u), psi_t(u)) for the product process.

    Args:
        spec: the product driver.
        u: argument vector, shape (..., d), real or complex.
        t: evaluation time, >= 0.

    Returns:
        ExponentPair with phi of shape (...) and psi of shape (..., d);
        phi sums over components, psi acts componentwise.

    Raises:
        DomainError: naming the first component whose argument is outside
            its domain.
    """
    u = np.asarray(u)
    u = u.astype(complex) if np.iscomplexobj(u) else u.astype(float)
    if u.shape[-1:] != (spec.d,):
        raise ParameterError(f"u must have trailing dimension {spec.d}")
    if t < 0:
        raise ParameterError("t must be non-negative")
    if t == 0:
        return ExponentPair(np.zeros(u.shape[:-1]), u.copy())
    phi = np.zeros(u.shape[:-1],
                   dtype=complex if np.iscomplexobj(u) else float)
    psi = np.empty_like(u)
    for i, comp in enumerate(spec.components):
        _check_component_domain(comp, u[..., i], t, component=i)
        phi_i, psi_i = _component_exponents_raw(comp, u[..., i], t)
        phi = phi + phi_i
        psi[..., i] = psi_i
    return ExponentPair(phi, psi)


def martingale_value(spec: ProductAffineSpec, x, u, t: float, T_N: float):
    """exp(phi_{T_N - t}(u) + <psi_{T_N - t}(u), x>).

    This is the time-t value of the exponential martingale with terminal
    payoff exp(<u, X_{T_N}>).  ``x`` may be a single state (d,) or a batch
    (..., d); the result broadcasts accordingly and is >= 1 whenever u >= 0
    and x >= 0.
    """
    if not 0 <= t <= T_N:
        raise ParameterError("need 0 <= t <= T_N")
    u = np.asarray(u, dtype=float)
    # domain is checked at the pricing horizon T_N: domains shrink with t,
    # so admissibility at T_N covers every earlier evaluation time
    for i, comp in enumerate(spec.components):
        _check_component_domain(comp, u[..., i], T_N, component=i)
    phi, psi = product_exponents(spec, u, T_N - t)
    x = np.asarray(x, dtype=float)
    return np.exp(phi + x @ psi)


def gamma_x_lower_bound(spec: ProductAffineSpec, T_N: float,
                        probe_grid: Sequence[float],
                        direction: np.ndarray | None = None) -> float:
    """Certified lower bound for the supremum of reachable exponential moments.

    Evaluates E_x0[exp(<xi * direction, X_{T_N}>)] over the probe scalars and
    returns the maximum; out-of-domain probes are skipped.  Used to check the
    curve-fitting feasibility condition against B(0,T_1)/B(0,T_N).

    Raises:
        DomainError: if every probe is outside the domain.
        ParameterError: if the probe grid is empty.
    """
    if len(probe_grid) == 0:
        raise ParameterError("probe_grid must be non-empty")
    if direction is None:
        direction = np.ones(spec.d)
    direction = np.asarray(direction, dtype=float)
    x0 = spec.x0
    best = None
    for xi in probe_grid:
        u = float(xi) * direction
        try:
            val = float(martingale_value(spec, x0, u, 0.0, T_N))
        except DomainError:
            continue
        best = val if best is None else max(best, val)
    if best is None:
        raise DomainError("all probes outside the exponent domain")
    return best
