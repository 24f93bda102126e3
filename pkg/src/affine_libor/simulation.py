"""Monte Carlo oracle: driver paths, Cox default times, reweighted pricing.

Paths of the independent square-root factors are simulated under the
terminal measure with a full-truncation Euler scheme (or exact transitions
when no component jumps), states are recorded at tenor dates, the hazard is
accumulated from the per-date default intensities, and the default time is
the first crossing of an independent unit-exponential trigger with the
linearly interpolated hazard.

Each path owns a counter-based Philox stream keyed by (seed, path index), so
results do not depend on the path count, the block partition, or the number
of worker threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .affine import martingale_value
from .calibration import CalibratedModel
from .errors import ParameterError, ValidationError
from .rates import aggregate_coefficients, default_intensity, hazard_at_tenor
from .results import PriceEstimate, CdsMcResult

__all__ = [
    "SimConfig",
    "PathBundle",
    "simulate",
    "mc_expect_forward",
    "mc_price_cds",
    "mc_price_bond_option",
    "mc_price_vulnerable_option",
    "crossing_times",
    "survival_table",
    "martingale_table",
]

_BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    scheme 'euler' is the full-truncation Euler discretization with
    compound-Poisson jumps added per sub-step; 'exact-cir' samples the exact
    square-root transition (one step per tenor period, valid only when every
    component has zero jump intensity).
    """

    n_paths: int
    steps_per_period: int = 64
    seed: int = 0
    scheme: str = "euler"

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.steps_per_period < 1:
            raise ParameterError("steps_per_period must be >= 1")
        if self.scheme not in ("euler", "exact-cir"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class PathBundle:
    """Immutable per-path simulation record.

    states[p, k, :] is X_{T_k} (k = 0..N), hazards[p, j] is the hazard at
    T_{j+1} (j = 0..N-1), triggers are the unit-exponential draws and
    defaults the crossing times (+inf when no crossing before T_N).
    """

    tenor_dates: np.ndarray
    states: np.ndarray
    hazards: np.ndarray
    triggers: np.ndarray
    defaults: np.ndarray
    config: SimConfig

    def __post_init__(self):
        for name in ("tenor_dates", "states", "hazards", "triggers",
                     "defaults"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def alive(self, k: int) -> np.ndarray:
        """Indicator of survival beyond T_k."""
        return self.defaults > self.tenor_dates[k]


def _path_rng(seed: int, path: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _euler_block(model: CalibratedModel, config: SimConfig,
                 paths: range) -> tuple[np.ndarray, np.ndarray]:
    """Tenor-date states and triggers for one block of paths."""
    driver = model.driver
    comps = driver.components
    d = driver.d
    n_tenors = model.n
    m = config.steps_per_period
    total = n_tenors * m
    npaths = len(paths)

    dts = np.repeat([model.grid.delta(k) / m for k in range(n_tenors)], m)
    jump_idx = [i for i, c in enumerate(comps) if c.ell > 0]

    normals = np.empty((npaths, total, d))
    jumps = np.zeros((npaths, total, len(jump_idx)))
    triggers = np.empty(npaths)
    for row, p in enumerate(paths):
        rng = _path_rng(config.seed, p)
        normals[row] = rng.standard_normal((total, d))
        for col, i in enumerate(jump_idx):
            counts = rng.poisson(comps[i].ell * dts, size=total)
            jumps[row, :, col] = comps[i].mu * rng.gamma(counts)
        triggers[row] = rng.standard_exponential()

    lam = np.array([c.lam for c in comps])
    theta = np.array([c.theta for c in comps])
    two_eta = np.array([2.0 * c.eta for c in comps])

    states = np.empty((npaths, n_tenors + 1, d))
    x = np.broadcast_to(driver.x0, (npaths, d)).copy()
    states[:, 0, :] = x
    step = 0
    for k in range(n_tenors):
        for _ in range(m):
            dt = dts[step]
            xp = np.maximum(x, 0.0)
            x = x + lam * (theta - xp) * dt \
                + two_eta * np.sqrt(xp * dt) * normals[:, step, :]
            if jump_idx:
                x[:, jump_idx] += jumps[:, step, :]
            step += 1
        states[:, k + 1, :] = np.maximum(x, 0.0)
    return states, triggers


def _exact_block(model: CalibratedModel, config: SimConfig,
                 paths: range) -> tuple[np.ndarray, np.ndarray]:
    """Exact square-root transitions tenor date to tenor date (no jumps).

    Stochastic components use the noncentral chi-square decomposition
    (Z + sqrt(nc))^2 + chi2_{df-1}, whose draws have a state-independent
    layout, so the whole block steps vectorized; this needs df >= 1,
    i.e. lam*theta >= eta^2.  Degenerate eta = 0 components follow their
    deterministic mean.
    """
    driver = model.driver
    comps = driver.components
    d = driver.d
    n_tenors = model.n
    npaths = len(paths)

    stoch = [i for i, c in enumerate(comps) if c.eta > 0]
    df = np.array([comps[i].lam * comps[i].theta / comps[i].eta**2
                   for i in stoch])
    if np.any(df < 1.0):
        raise ValidationError(
            "exact-cir scheme needs lam*theta >= eta^2 for every "
            "stochastic component (chi-square degrees of freedom >= 1)")

    # per-period transition constants: X' = c * chi'2(df, x*a/c)
    a_k = np.empty((n_tenors, d))
    c_k = np.ones((n_tenors, d))
    for k in range(n_tenors):
        dt = model.grid.delta(k)
        for i, c in enumerate(comps):
            a_k[k, i] = np.exp(-c.lam * dt)
            b = -np.expm1(-c.lam * dt) / c.lam if c.lam > 0 else dt
            if c.eta > 0:
                c_k[k, i] = c.eta**2 * b
    theta = np.array([c.theta for c in comps])

    n_st = len(stoch)
    normals = np.empty((npaths, n_tenors, n_st))
    gammas = np.empty((npaths, n_tenors, n_st))
    triggers = np.empty(npaths)
    gamma_shape = np.broadcast_to((df - 1.0) / 2.0, (n_tenors, n_st))
    for row, p in enumerate(paths):
        rng = _path_rng(config.seed, p)
        normals[row] = rng.standard_normal((n_tenors, n_st))
        gammas[row] = rng.gamma(gamma_shape, 2.0)
        triggers[row] = rng.standard_exponential()

    states = np.empty((npaths, n_tenors + 1, d))
    x = np.broadcast_to(driver.x0, (npaths, d)).copy()
    states[:, 0, :] = x
    for k in range(n_tenors):
        x = theta + (x - theta) * a_k[k]
        for col, i in enumerate(stoch):
            nc = states[:, k, i] * a_k[k, i] / c_k[k, i]
            z = normals[:, k, col] + np.sqrt(nc)
            x[:, i] = c_k[k, i] * (z**2 + gammas[:, k, col])
        states[:, k + 1, :] = x
    return states, triggers


def _hazard_paths(model: CalibratedModel, states: np.ndarray) -> np.ndarray:
    """Accumulate the hazard at T_1..T_N from per-date intensities.

    The first increment is the affine tenor-date hazard at the initial
    state; later increments add log(1 + delta_k H(T_k, T_k)) evaluated at
    the simulated state, which keeps the hazard nondecreasing path by path.
    """
    n = model.n
    npaths = states.shape[0]
    hazards = np.empty((npaths, n))
    hazards[:, 0] = hazard_at_tenor(model, model.x0, 0)
    for k in range(1, n):
        t_k = model.grid.date(k)
        h = default_intensity(model, states[:, k, :], t_k, k)
        hazards[:, k] = hazards[:, k - 1] \
            + np.log1p(model.grid.delta(k) * np.maximum(h, 0.0))
    return hazards


def crossing_times(tenor_dates: np.ndarray, hazards: np.ndarray,
                   triggers: np.ndarray,
                   interpolation: str = "linear") -> np.ndarray:
    """First time the interpolated hazard reaches the trigger level.

    With 'linear' interpolation the crossing is located inside the tenor
    interval; with 'piecewise-constant' the hazard jumps at tenor dates and
    crossings land exactly on them.  Returns +inf for paths whose hazard
    stays below the trigger through T_N.
    """
    npaths = hazards.shape[0]
    grid = np.concatenate([np.zeros((npaths, 1)), hazards], axis=1)
    eta = triggers[:, None]
    crossed = grid >= eta
    has = crossed.any(axis=1)
    idx = np.argmax(crossed, axis=1)  # first True; >= 1 since grid[:,0] = 0
    tau = np.full(npaths, np.inf)
    rows = np.nonzero(has)[0]
    j = idx[rows]
    g_prev = grid[rows, j - 1]
    g_next = grid[rows, j]
    t_prev = tenor_dates[j - 1]
    t_next = tenor_dates[j]
    if interpolation == "linear":
        denom = g_next - g_prev
        frac = np.where(denom > 0, (triggers[rows] - g_prev)
                        / np.where(denom > 0, denom, 1.0), 0.0)
        tau[rows] = t_prev + frac * (t_next - t_prev)
    elif interpolation == "piecewise-constant":
        tau[rows] = t_next
    else:
        raise ParameterError(f"unknown interpolation {interpolation!r}")
    return tau


def simulate(model: CalibratedModel, config: SimConfig) -> PathBundle:
    """Simulate driver paths and Cox default times under the terminal measure.

    Deterministic for a fixed (model, config): path p consumes only its own
    (seed, p)-keyed stream.  Worker-thread count is capped by the
    ALM_THREADS environment variable.
    """
    if config.scheme == "exact-cir":
        bad = [i for i, c in enumerate(model.driver.components) if c.ell > 0]
        if bad:
            raise ValidationError(
                f"exact-cir scheme requires ell = 0; components {bad} jump")
        block_fn = _exact_block
    else:
        block_fn = _euler_block

    n_paths = config.n_paths
    blocks = [range(lo, min(lo + _BLOCK, n_paths))
              for lo in range(0, n_paths, _BLOCK)]
    env = os.environ.get("ALM_THREADS", "")
    cap = int(env) if env.strip().isdigit() else (os.cpu_count() or 1)
    workers = max(1, min(len(blocks), cap))

    if workers == 1:
        parts = [block_fn(model, config, b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: block_fn(model, config, b),
                                  blocks))
    states = np.concatenate([p[0] for p in parts], axis=0)
    triggers = np.concatenate([p[1] for p in parts], axis=0)

    hazards = _hazard_paths(model, states)
    dates = np.array([model.grid.date(k) for k in range(model.n + 1)])
    defaults = crossing_times(dates, hazards, triggers, "linear")
    return PathBundle(tenor_dates=dates, states=states, hazards=hazards,
                      triggers=triggers, defaults=defaults, config=config)


def _forward_weights(model: CalibratedModel, bundle: PathBundle,
                     k: int) -> np.ndarray:
    """Per-path density dP_k/dP_N on F_{T_k}: M^{u_k}_{T_k} / M^{u_k}_0."""
    t_k = model.grid.date(k)
    t_n = model.grid.terminal
    u_k = model.u(k)
    m_t = martingale_value(model.driver, bundle.states[:, k, :], u_k, t_k, t_n)
    m_0 = martingale_value(model.driver, model.x0, u_k, 0.0, t_n)
    return m_t / m_0


def mc_expect_forward(model: CalibratedModel, bundle: PathBundle, k: int,
                      payoff) -> PriceEstimate:
    """Estimate E_k[payoff] by reweighting terminal-measure paths.

    Args:
        k: forward-measure index in 1..N.
        payoff: callable(states_at_Tk, alive_at_Tk) -> per-path values,
            where alive_at_Tk is the survival indicator 1{tau > T_k}.
    """
    if not 1 <= k <= model.n:
        raise IndexError(f"measure index {k} outside 1..{model.n}")
    w = _forward_weights(model, bundle, k)
    vals = np.asarray(payoff(bundle.states[:, k, :], bundle.alive(k)),
                      dtype=float) * w
    n = len(vals)
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return PriceEstimate(value=float(vals.mean()), method="mc", std_error=se)


def mc_price_cds(model: CalibratedModel, bundle: PathBundle, m: int,
                 pi: float, c: float) -> CdsMcResult:
    """Monte Carlo CDS legs and implied spread for protection to T_m.

    The protection buyer receives 1 - pi*(1+c) at T_k if default happens in
    (T_{k-1}, T_k]; the fee leg collects the spread at T_0..T_{m-1} while no
    default has occurred.  Per-path leg values are aggregated so the
    standard error accounts for cross-date correlation.
    """
    if not 1 <= m <= model.n:
        raise IndexError(f"maturity index {m} outside 1..{model.n}")
    if not 0 <= pi < 1:
        raise ParameterError("recovery fraction pi must be in [0, 1)")
    lgd = 1.0 - pi * (1.0 + c)
    fee = sum(model.curves.defaultable_at(l - 1) for l in range(1, m + 1))

    n_paths = bundle.n_paths
    protection = np.zeros(n_paths)
    for k in range(1, m + 1):
        w_k = _forward_weights(model, bundle, k)
        bucket = bundle.alive(k - 1).astype(float) \
            - bundle.alive(k).astype(float)
        protection += model.curves.risk_free_at(k) * lgd * bucket * w_k
    se = float(protection.std(ddof=1) / np.sqrt(n_paths))
    prot = PriceEstimate(value=float(protection.mean()), method="mc",
                         std_error=se)
    spread_est = PriceEstimate(value=prot.value / fee, method="mc",
                               std_error=se / fee)
    return CdsMcResult(fee_leg=fee, protection_leg=prot, spread=spread_est)


def mc_price_bond_option(model: CalibratedModel, bundle: PathBundle, i: int,
                         m: int, strike: float, pi: float) -> PriceEstimate:
    """Call on a defaultable bond with fractional treasury recovery.

    Pays 1{tau > T_i} (pi * B(T_i,T_m) + (1-pi) * Bbar(T_i,T_m) - K)^+ at
    T_i; bonds are reconstructed per path from the aggregate coefficients.
    """
    if not 1 <= i < m <= model.n:
        raise IndexError(f"need 1 <= i < m <= {model.n}")
    rf = aggregate_coefficients(model, i, m)
    db = aggregate_coefficients(model, i, m, defaultable=True)

    def payoff(x, alive):
        bond = rf.exp_affine(x)
        dbond = db.exp_affine(x)
        return alive * np.maximum(pi * bond + (1 - pi) * dbond - strike, 0.0)

    est = mc_expect_forward(model, bundle, i, payoff)
    scale = model.curves.risk_free_at(i)
    return PriceEstimate(value=scale * est.value, method="mc",
                         std_error=scale * est.std_error)


def mc_price_vulnerable_option(model: CalibratedModel, bundle: PathBundle,
                               k: int, m: int, strike: float,
                               q: float) -> PriceEstimate:
    """Call on a default-free bond written by a defaultable counterparty.

    The payoff (B(T_k,T_m) - K)^+ is reduced to the fraction q in [0, 1]
    when the writer has defaulted by T_k.
    """
    if not 1 <= k < m <= model.n:
        raise IndexError(f"need 1 <= k < m <= {model.n}")
    if not 0 <= q <= 1:
        raise ParameterError("recovery q must be in [0, 1]")
    rf = aggregate_coefficients(model, k, m)

    def payoff(x, alive):
        call = np.maximum(rf.exp_affine(x) - strike, 0.0)
        return (alive * (1.0 - q) + q) * call

    est = mc_expect_forward(model, bundle, k, payoff)
    scale = model.curves.risk_free_at(k)
    return PriceEstimate(value=scale * est.value, method="mc",
                         std_error=scale * est.std_error)


def survival_table(model: CalibratedModel, bundle: PathBundle) -> list[dict]:
    """Per-tenor comparison of empirical and model survival probabilities.

    'empirical' is the indicator fraction, 'pathwise' the sample mean of
    exp(-hazard) over the same paths (their difference has mean zero by the
    tower property, reported as a paired z-score), and 'model' the
    exponential-affine value implied by the tenor-date hazard map.
    """
    rows = []
    n_paths = bundle.n_paths
    for k in range(1, model.n + 1):
        alive = bundle.alive(k).astype(float)
        surv = np.exp(-bundle.hazards[:, k - 1])
        diff = alive - surv
        se = float(diff.std(ddof=1) / np.sqrt(n_paths))
        z = float(diff.mean() / se) if se > 0 else 0.0
        # affine route: E_N[exp(-A - <B, X_{T_{k-1}}>)] via the exponents
        coeff = _hazard_affine_survival(model, k)
        emp = float(alive.mean())
        emp_se = float(alive.std(ddof=1) / np.sqrt(n_paths))
        rows.append({
            "k": k,
            "date": model.grid.date(k),
            "empirical": emp,
            "empirical_se": emp_se,
            "pathwise": float(surv.mean()),
            "paired_z": z,
            "model": coeff,
            "model_z": (emp - coeff) / emp_se if emp_se > 0 else 0.0,
        })
    return rows


def _hazard_affine_survival(model: CalibratedModel, k: int) -> float:
    """E_N[exp(-Gamma_{T_k})] with the affine tenor-date hazard map."""
    from .rates import hazard_coefficients
    from .affine import product_exponents
    coeff = hazard_coefficients(model, k - 1)
    t = model.grid.date(k - 1)
    pair = product_exponents(model.driver, -coeff.B, t)
    return float(np.exp(-coeff.A + pair.phi + pair.psi @ model.x0))


def martingale_table(model: CalibratedModel, bundle: PathBundle) -> list[dict]:
    """Sample means of M^{u_k}_{T_j} across tenor dates with z-scores.

    Each row compares the mean at observation date T_j against the exact
    initial value M^{u_k}_0; |z| persistently above 3 flags a bias.
    """
    rows = []
    t_n = model.grid.terminal
    n_paths = bundle.n_paths
    for k in range(1, model.n + 1):
        u_k = model.u(k)
        m0 = float(martingale_value(model.driver, model.x0, u_k, 0.0, t_n))
        for j in range(1, k + 1):
            t_j = model.grid.date(j)
            vals = martingale_value(model.driver, bundle.states[:, j, :],
                                    u_k, t_j, t_n)
            se = float(vals.std(ddof=1) / np.sqrt(n_paths))
            z = float((vals.mean() - m0) / se) if se > 0 else 0.0
            rows.append({"k": k, "j": j, "mean": float(vals.mean()),
                         "target": m0, "se": se, "z": z})
    return rows
