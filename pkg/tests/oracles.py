"""Independent reference computations for the test suite.

Everything here deliberately avoids the library's pricing code paths: exact
noncentral chi-square transition densities against dense quadrature grids,
plus raw integrations of the Riccati system.  These serve as the frozen
oracles for option prices and exponent values.
"""
import numpy as np
from scipy.stats import ncx2

from affine_libor import martingale_value, product_exponents
from affine_libor.rates import aggregate_coefficients


def transition_density_nodes(comp, t, n_nodes=3000, x_max_sd=16.0):
    """Quadrature nodes weighted by the exact one-step transition density.

    The square-root diffusion started at comp.x0 has, after time t, the law
    c * chi'2(df, x0 * a / c) with c = eta^2 * b(t) and df = lam*theta/eta^2.
    """
    a = np.exp(-comp.lam * t)
    b = -np.expm1(-comp.lam * t) / comp.lam if comp.lam > 0 else t
    c = comp.eta**2 * b
    df = comp.lam * comp.theta / comp.eta**2
    nc = comp.x0 * a / c
    mean = c * (df + nc)
    sd = c * np.sqrt(2 * (df + 2 * nc))
    xmax = mean + x_max_sd * sd
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    x = 0.5 * xmax * (x + 1.0)
    w = 0.5 * xmax * w
    return x, w * ncx2.pdf(x / c, df, nc) / c


def _measure_weight(model, seq_vec, grid_x1, grid_x2, t):
    """Per-node density of the chosen martingale measure change vs P_N."""
    driver = model.driver
    pair = product_exponents(driver, seq_vec, model.grid.terminal - t)
    m_t = np.exp(pair.phi + pair.psi[0] * grid_x1 + pair.psi[1] * grid_x2)
    m_0 = float(martingale_value(driver, model.x0, seq_vec, 0.0,
                                 model.grid.terminal))
    return m_t / m_0


def state_space_bond_option(model, i, m, strike, pi, n_nodes=3000):
    """Defaultable bond option price by exact-density quadrature.

    Only valid for two-component drivers (one risk-free, one spread
    factor), which is what the test models use.
    """
    assert model.driver.d == 2
    grid = model.grid
    t_i = grid.date(i)
    x1, w1 = transition_density_nodes(model.driver.components[0], t_i, n_nodes)
    x2, w2 = transition_density_nodes(model.driver.components[1], t_i, n_nodes)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    rf = aggregate_coefficients(model, i, m)
    df = aggregate_coefficients(model, i, m, defaultable=True)
    bond = np.exp(rf.A + rf.B[0] * X1 + rf.B[1] * X2)
    dbond = np.exp(df.A + df.B[0] * X1 + df.B[1] * X2)
    payoff = np.maximum(pi * bond + (1 - pi) * dbond - strike, 0.0)
    weight = _measure_weight(model, model.v(i), X1, X2, t_i)
    value = np.einsum("i,j,ij->", w1, w2, payoff * weight)
    return model.curves.defaultable_at(i) * value


def state_space_vulnerable(model, k, m, strike, q, n_nodes=3000):
    """Vulnerable call price by exact-density quadrature (two factors)."""
    assert model.driver.d == 2
    grid = model.grid
    t_k = grid.date(k)
    x1, w1 = transition_density_nodes(model.driver.components[0], t_k, n_nodes)
    x2, w2 = transition_density_nodes(model.driver.components[1], t_k, n_nodes)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    rf = aggregate_coefficients(model, k, m)
    call = np.maximum(np.exp(rf.A + rf.B[0] * X1 + rf.B[1] * X2) - strike,
                      0.0)
    w_u = _measure_weight(model, model.u(k), X1, X2, t_k)
    w_v = _measure_weight(model, model.v(k), X1, X2, t_k)
    e_k = np.einsum("i,j,ij->", w1, w2, call * w_u)
    eb_k = np.einsum("i,j,ij->", w1, w2, call * w_v)
    return model.curves.defaultable_at(k) * (1 - q) * eb_k \
        + model.curves.risk_free_at(k) * q * e_k


def integrate_riccati_raw(lam, theta, eta, ell, mu, u, t, steps=200_000):
    """Plain fixed-step RK4 on phi' = F(psi), psi' = R(psi); test-side oracle."""
    def f_fn(p):
        out = lam * theta * p
        if ell > 0:
            out += ell * p / (1.0 / mu - p)
        return out

    def r_fn(p):
        return 2.0 * eta**2 * p**2 - lam * p

    h = t / steps
    phi, psi = 0.0, u
    try:
        for _ in range(steps):
            k1p, k1s = f_fn(psi), r_fn(psi)
            k2p, k2s = f_fn(psi + 0.5 * h * k1s), r_fn(psi + 0.5 * h * k1s)
            k3p, k3s = f_fn(psi + 0.5 * h * k2s), r_fn(psi + 0.5 * h * k2s)
            k4p, k4s = f_fn(psi + h * k3s), r_fn(psi + h * k3s)
            phi += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
            psi += h * (k1s + 2 * k2s + 2 * k3s + k4s) / 6.0
            if not (np.isfinite(phi) and np.isfinite(psi)):
                return np.nan, np.nan
    except (OverflowError, ZeroDivisionError):
        return np.nan, np.nan
    return phi, psi


def sample_exact_transition(comp, t, n, rng):
    """Direct draws from the exact one-step square-root transition law."""
    a = np.exp(-comp.lam * t)
    b = -np.expm1(-comp.lam * t) / comp.lam if comp.lam > 0 else t
    c = comp.eta**2 * b
    df = comp.lam * comp.theta / comp.eta**2
    nc = comp.x0 * a / c
    counts = rng.poisson(nc / 2.0, size=n)
    return c * 2.0 * rng.gamma(df / 2.0 + counts)
