"""Fit the martingale parameter sequences to observed discount curves.

The risk-free sequence u_1 >= ... >= u_N = 0 matches the default-free curve
through M_0^{u_k} = B(0,T_k)/B(0,T_N); the spread scalars 0 >= w_1 >= ... >=
w_N match the survival ratios through M_0^{w_k} = Bbar(0,T_k)/B(0,T_k).  Both
fits are monotone scalar root-finding problems along a fixed direction
vector, solved by bisection (globally convergent, mirroring the continuity
and monotonicity argument that guarantees existence).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .affine import ProductAffineSpec, martingale_value, product_exponents, \
    component_domain_bound
from .errors import AssemblyError, CalibrationError, ParameterError, \
    ValidationError

__all__ = [
    "TenorGrid",
    "InitialCurves",
    "CalibratedModel",
    "ConditionsReport",
    "fit_risk_free",
    "fit_spread",
    "assemble",
    "calibrate",
    "verify_conditions",
]

XI_TOL = 1e-12
TARGET_RTOL = 1e-12
DOMAIN_SAFETY = 0.95


@dataclass(frozen=True)
class TenorGrid:
    """Strictly increasing tenor dates T_1 < ... < T_N, with T_0 = 0."""

    dates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(float(t) for t in self.dates))
        if len(self.dates) < 2:
            raise ValidationError("need at least two tenor dates")
        if self.dates[0] <= 0:
            raise ValidationError("T_1 must be positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("tenor dates must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def terminal(self) -> float:
        return self.dates[-1]

    def date(self, k: int) -> float:
        """T_k with the convention T_0 = 0."""
        if not 0 <= k <= self.n:
            raise IndexError(f"tenor index {k} outside 0..{self.n}")
        return 0.0 if k == 0 else self.dates[k - 1]

    def delta(self, k: int) -> float:
        """Accrual factor delta_k = T_{k+1} - T_k for k = 0..N-1."""
        if not 0 <= k < self.n:
            raise IndexError(f"accrual index {k} outside 0..{self.n - 1}")
        return self.date(k + 1) - self.date(k)


@dataclass(frozen=True)
class InitialCurves:
    """Initial default-free and defaultable discount factors at T_1..T_N.

    Invariants: 0 < Bbar(0,T_k) <= B(0,T_k) <= 1, non-negative forward rates
    on both curves, and defaultable rates dominating default-free ones
    (equivalently Bbar/B nonincreasing).
    """

    risk_free: tuple[float, ...]
    defaultable: tuple[float, ...]

    def __post_init__(self):
        rf = tuple(float(v) for v in self.risk_free)
        df = tuple(float(v) for v in self.defaultable)
        object.__setattr__(self, "risk_free", rf)
        object.__setattr__(self, "defaultable", df)
        if len(rf) != len(df):
            raise ValidationError("curve lengths differ")
        n = len(rf)
        for k in range(n):
            if not (0.0 < df[k] <= rf[k] <= 1.0):
                raise ValidationError(
                    f"need 0 < Bbar <= B <= 1 at tenor index {k + 1}: "
                    f"B={rf[k]:g}, Bbar={df[k]:g}")
        for k in range(n - 1):
            if rf[k] < rf[k + 1]:
                raise ValidationError(
                    f"negative forward rate: B(0,T_{k + 1}) < B(0,T_{k + 2})")
        ratios = [df[k] / rf[k] for k in range(n)]
        for k in range(n - 1):
            if ratios[k] < ratios[k + 1] - 1e-15:
                raise ValidationError(
                    "defaultable rates must dominate risk-free ones: "
                    f"Bbar/B increases from tenor {k + 1} to {k + 2}")

    @property
    def n(self) -> int:
        return len(self.risk_free)

    def risk_free_at(self, k: int) -> float:
        """B(0,T_k), with B(0,T_0) = 1."""
        return 1.0 if k == 0 else self.risk_free[k - 1]

    def defaultable_at(self, k: int) -> float:
        """Bbar(0,T_k), with Bbar(0,T_0) = 1."""
        return 1.0 if k == 0 else self.defaultable[k - 1]

    def survival_ratio(self, k: int) -> float:
        """Bbar(0,T_k)/B(0,T_k), the curve-implied survival factor."""
        return self.defaultable_at(k) / self.risk_free_at(k)


def _sample_monotone(f: Callable[[float], float], lo: float, hi: float):
    """Assert f is nondecreasing on a coarse sample of [lo, hi]."""
    xs = np.linspace(lo, hi, 5)
    vals = [f(x) for x in xs]
    if any(b < a - 1e-13 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:])):
        raise CalibrationError(
            f"moment function not monotone on [{lo:g}, {hi:g}]")


def _bisect(f: Callable[[float], float], target: float, lo: float, hi: float,
            f_lo: float, f_hi: float) -> float:
    """Root of the increasing f(x) = target on [lo, hi] by bisection."""
    for _ in range(240):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if f_mid < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= XI_TOL * max(1.0, abs(hi)) and \
                abs(f_mid - target) <= TARGET_RTOL * abs(target):
            break
    xi = 0.5 * (lo + hi)
    residual = abs(f(xi) - target)
    if residual > 1e-10 * abs(target):
        raise CalibrationError(
            f"bisection residual {residual:g} exceeds tolerance for "
            f"target {target:g}", attained=f(xi), target=target)
    return xi


def _embedded_direction(driver: ProductAffineSpec, direction, block: str):
    if block == "risk_free":
        size, offset = driver.d1, 0
    else:
        size, offset = driver.d2, driver.d1
    if direction is None:
        direction = np.ones(size)
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (size,):
        raise ParameterError(
            f"direction must have length {size} for the {block} block")
    if np.any(direction < 0) or not np.any(direction > 0):
        raise ParameterError("direction must be non-negative and non-zero")
    full = np.zeros(driver.d)
    full[offset:offset + size] = direction
    return full


def _direction_domain_cap(driver: ProductAffineSpec, dir_full: np.ndarray,
                          horizon: float) -> float:
    cap = np.inf
    for i, comp in enumerate(driver.components):
        if dir_full[i] > 0:
            cap = min(cap, component_domain_bound(comp, horizon) / dir_full[i])
    return cap


def fit_risk_free(driver: ProductAffineSpec, grid: TenorGrid,
                  curves: InitialCurves,
                  direction: Sequence[float] | None = None) -> np.ndarray:
    """Fit u_k so that M_0^{u_k} = B(0,T_k)/B(0,T_N) for k = 1..N.

    Solves f(xi) = M_0^{xi * direction} = target by bisection along the
    given non-negative direction over the risk-free block (all ones by
    default); returns the (N, d) array of fitted vectors with zero spread
    block.  The sequence is decreasing with u_N = 0, strictly decreasing
    when all initial LIBOR rates are strictly positive.

    Raises:
        CalibrationError: if a target exceeds the moment reachable inside
            the exponent domain (reports the attained bound).
    """
    if curves.n != grid.n:
        raise ValidationError("curve and grid lengths differ")
    dir_full = _embedded_direction(driver, direction, "risk_free")
    t_n = grid.terminal
    x0 = driver.x0
    targets = [curves.risk_free_at(k) / curves.risk_free_at(grid.n)
               for k in range(1, grid.n + 1)]

    def f(xi: float) -> float:
        return float(martingale_value(driver, x0, xi * dir_full, 0.0, t_n))

    cap = DOMAIN_SAFETY * _direction_domain_cap(driver, dir_full, t_n)
    top = max(targets)
    hi = min(1.0, cap) if np.isfinite(cap) else 1.0
    f_hi = f(hi)
    grows = 0
    while f_hi < top and hi < cap and grows < 200:
        hi = min(2.0 * hi, cap)
        f_hi = f(hi)
        grows += 1
    if f_hi < top:
        raise CalibrationError(
            f"curve infeasible: max reachable moment {f_hi:g} below "
            f"target {top:g} (xi capped at {hi:g})",
            attained=f_hi, target=top)
    _sample_monotone(f, 0.0, hi)

    u_seq = np.zeros((grid.n, driver.d))
    for j, target in enumerate(targets):
        if target == 1.0:
            continue
        xi = _bisect(f, target, 0.0, hi, 1.0, f_hi)
        u_seq[j] = xi * dir_full
    return u_seq


def fit_spread(driver: ProductAffineSpec, grid: TenorGrid,
               curves: InitialCurves,
               direction: Sequence[float] | None = None) -> np.ndarray:
    """Fit the spread scalars w_k with M_0^{w_k * direction} = Bbar/B at T_k.

    The survival ratios Bbar(0,T_k)/B(0,T_k) are at most one and
    nonincreasing, so the solutions satisfy 0 >= w_1 >= ... >= w_N, found by
    mirrored doubling on the negative ray followed by bisection.

    Raises:
        ValidationError: if a ratio exceeds one.
        CalibrationError: if a ratio is below the attainable infimum of the
            moment on the negative ray.
    """
    if curves.n != grid.n:
        raise ValidationError("curve and grid lengths differ")
    dir_full = _embedded_direction(driver, direction, "spread")
    t_n = grid.terminal
    x0 = driver.x0
    ratios = [curves.survival_ratio(k) for k in range(1, grid.n + 1)]
    if any(r > 1.0 for r in ratios):
        raise ValidationError("survival ratio above one")

    def f(xi: float) -> float:
        return float(martingale_value(driver, x0, xi * dir_full, 0.0, t_n))

    bottom = min(ratios)
    lo, f_lo = 0.0, 1.0
    if bottom < 1.0:
        lo, f_lo = -1.0, f(-1.0)
        grows = 0
        while f_lo > bottom and grows < 200:
            prev = f_lo
            lo *= 2.0
            f_lo = f(lo)
            grows += 1
            if prev - f_lo <= 1e-16 and f_lo > bottom:
                raise CalibrationError(
                    f"survival ratio {bottom:g} unreachable: moment "
                    f"stalls at {f_lo:g} on the negative ray",
                    attained=f_lo, target=bottom)
        if f_lo > bottom:
            raise CalibrationError(
                f"survival ratio {bottom:g} unreachable within bracket",
                attained=f_lo, target=bottom)
    _sample_monotone(f, lo, 0.0)

    w_seq = np.zeros(grid.n)
    for j, ratio in enumerate(ratios):
        if ratio == 1.0:
            continue
        w_seq[j] = _bisect(f, ratio, lo, 0.0, f_lo, 1.0)
    return w_seq


@dataclass(frozen=True)
class CalibratedModel:
    """Immutable result of fitting a driver to initial curves.

    Holds the tenor grid, the input curves, the driving process, the fitted
    risk-free vectors u_k, the spread scalars w_k with their direction, and
    the defaultable vectors v_k = u_k + w_k * spread_direction (embedded).
    """

    grid: TenorGrid
    curves: InitialCurves
    driver: ProductAffineSpec
    u_seq: np.ndarray
    w_seq: np.ndarray
    spread_direction: np.ndarray
    v_seq: np.ndarray

    def __post_init__(self):
        for name in ("u_seq", "w_seq", "spread_direction", "v_seq"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def x0(self) -> np.ndarray:
        return self.driver.x0

    def u(self, k: int) -> np.ndarray:
        """u_k for k = 1..N; k = 0 returns the zero sentinel (M^{u_0}/M^{v_0} = 1)."""
        if k == 0:
            return np.zeros(self.driver.d)
        return self.u_seq[k - 1]

    def v(self, k: int) -> np.ndarray:
        """v_k for k = 1..N; k = 0 returns the zero sentinel."""
        if k == 0:
            return np.zeros(self.driver.d)
        return self.v_seq[k - 1]


def assemble(driver: ProductAffineSpec, grid: TenorGrid,
             curves: InitialCurves, u_seq: np.ndarray, w_seq: np.ndarray,
             spread_direction: Sequence[float] | None = None) -> CalibratedModel:
    """Combine fitted sequences into a CalibratedModel, verifying invariants.

    Checks monotonicity of u_k, w_k and v_k, v_k <= u_k, and that the
    time-0 martingale values reproduce both curves to 1e-10 relative.

    Raises:
        AssemblyError: naming the first failing tenor index.
    """
    u_seq = np.asarray(u_seq, dtype=float)
    w_seq = np.asarray(w_seq, dtype=float)
    n, d = grid.n, driver.d
    if u_seq.shape != (n, d):
        raise AssemblyError(f"u_seq must have shape {(n, d)}")
    if w_seq.shape != (n,):
        raise AssemblyError(f"w_seq must have shape {(n,)}")
    sdir = _embedded_direction(driver, spread_direction, "spread")
    v_seq = u_seq + w_seq[:, None] * sdir[None, :]

    tol = 1e-12
    if np.any(np.abs(u_seq[-1]) > 0):
        raise AssemblyError("u_N must be zero", index=n)
    if np.any(w_seq > tol):
        raise AssemblyError("w_k must be non-positive",
                            index=int(np.argmax(w_seq > tol)) + 1)
    for k in range(n - 1):
        if np.any(u_seq[k] < u_seq[k + 1] - tol):
            raise AssemblyError(f"u_{k + 1} < u_{k + 2} componentwise",
                                index=k + 1)
        if w_seq[k] < w_seq[k + 1] - tol:
            raise AssemblyError(f"w_{k + 1} < w_{k + 2}", index=k + 1)
        if np.any(v_seq[k] < v_seq[k + 1] - tol):
            raise AssemblyError(f"v_{k + 1} < v_{k + 2} componentwise",
                                index=k + 1)
    if np.any(v_seq > u_seq + tol):
        raise AssemblyError("v_k must not exceed u_k componentwise")

    x0 = driver.x0
    t_n = grid.terminal
    for k in range(1, n + 1):
        target_u = curves.risk_free_at(k) / curves.risk_free_at(n)
        target_v = curves.defaultable_at(k) / curves.risk_free_at(n)
        got_u = float(martingale_value(driver, x0, u_seq[k - 1], 0.0, t_n))
        got_v = float(martingale_value(driver, x0, v_seq[k - 1], 0.0, t_n))
        if abs(got_u - target_u) > 1e-10 * target_u:
            raise AssemblyError(
                f"M_0^u_{k} = {got_u!r} misses {target_u!r}", index=k)
        if abs(got_v - target_v) > 1e-10 * target_v:
            raise AssemblyError(
                f"M_0^v_{k} = {got_v!r} misses {target_v!r}", index=k)
    return CalibratedModel(grid=grid, curves=curves, driver=driver,
                           u_seq=u_seq, w_seq=w_seq, spread_direction=sdir,
                           v_seq=v_seq)


def calibrate(driver: ProductAffineSpec, grid: TenorGrid,
              curves: InitialCurves,
              risk_free_direction: Sequence[float] | None = None,
              spread_direction: Sequence[float] | None = None) -> CalibratedModel:
    """Full pipeline: fit both sequences and assemble the model."""
    u_seq = fit_risk_free(driver, grid, curves, risk_free_direction)
    w_seq = fit_spread(driver, grid, curves, spread_direction)
    return assemble(driver, grid, curves, u_seq, w_seq, spread_direction)


@dataclass
class ConditionsReport:
    """Structured pass/fail report for the structural conditions.

    c1: u_k decreasing with u_N = 0; c2: v_k decreasing; c3: v_k <= u_k;
    c4: exponent differences phi_t(v_k) - phi_t(u_k) (and psi likewise)
    nonincreasing in k on the supplied time grid.
    """

    c1: bool
    c2: bool
    c3: bool
    c4: bool
    violations: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return self.c1 and self.c2 and self.c3 and self.c4

    def as_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4,
                "all_passed": self.all_passed, "violations": self.violations}


def verify_conditions(model: CalibratedModel,
                      time_grid: Sequence[float]) -> ConditionsReport:
    """Check conditions (C1)-(C4) on a calibrated model.

    Under the independent-product construction (C4) holds identically, so a
    violation there indicates a model bug rather than bad inputs.
    """
    tol = 1e-10
    u, v, w = model.u_seq, model.v_seq, model.w_seq
    n = model.n
    violations: list[str] = []

    c1 = bool(np.all(np.abs(u[-1]) == 0))
    if not c1:
        violations.append("C1: u_N != 0")
    for k in range(n - 1):
        if np.any(u[k] < u[k + 1] - tol):
            c1 = False
            violations.append(f"C1: u_{k + 1} < u_{k + 2}")
    if np.any(u < -tol):
        c1 = False
        violations.append("C1: u_k has negative entries")

    c2 = True
    for k in range(n - 1):
        if np.any(v[k] < v[k + 1] - tol):
            c2 = False
            violations.append(f"C2: v_{k + 1} < v_{k + 2}")

    c3 = bool(np.all(v <= u + tol))
    if not c3:
        violations.append("C3: v_k > u_k somewhere")

    c4 = True
    for t in time_grid:
        if t < 0:
            raise ParameterError("time grid entries must be >= 0")
        phis = np.empty(n)
        psis = np.empty((n, model.driver.d))
        for k in range(n):
            pu = product_exponents(model.driver, u[k], t)
            pv = product_exponents(model.driver, v[k], t)
            phis[k] = pv.phi - pu.phi
            psis[k] = pv.psi - pu.psi
        for k in range(n - 1):
            scale = 1.0 + abs(phis[k])
            if phis[k] < phis[k + 1] - tol * scale:
                c4 = False
                violations.append(f"C4.a: k={k + 1}, t={t:g}")
            if np.any(psis[k] < psis[k + 1] - tol * (1 + np.abs(psis[k]))):
                c4 = False
                violations.append(f"C4.b: k={k + 1}, t={t:g}")
    # suppress duplicates while keeping order
    seen: set[str] = set()
    violations = [x for x in violations if not (x in seen or seen.add(x))]
    return ConditionsReport(c1=c1, c2=c2, c3=c3, c4=c4,
                            violations=violations)
