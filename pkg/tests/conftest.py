import numpy as np
import pytest

from affine_libor import (AffineComponentSpec, InitialCurves,
                          ProductAffineSpec, SimConfig, TenorGrid, calibrate,
                          simulate)


def quarterly_grid(n=8):
    return TenorGrid(dates=tuple(0.25 * (k + 1) for k in range(n)))


def curve_pair(grid, rate=0.03, curv=0.002, hazard=0.025, hcurv=0.001):
    t = np.array(grid.dates)
    rf = np.exp(-rate * t - curv * t**2)
    df = rf * np.exp(-hazard * t - hcurv * t**2)
    return InitialCurves(risk_free=tuple(rf), defaultable=tuple(df))


BASE_DRIVER = ProductAffineSpec(components=(
    AffineComponentSpec(lam=1.2, theta=1.0, eta=0.30, x0=1.0),
    AffineComponentSpec(lam=0.9, theta=1.0, eta=0.22, x0=1.0),
), d1=1, d2=1)

# spread component jumps: compound Poisson with exponential marks
JUMPY_DRIVER = ProductAffineSpec(components=(
    AffineComponentSpec(lam=1.2, theta=1.0, eta=0.30, x0=1.0),
    AffineComponentSpec(lam=0.9, theta=0.9, eta=0.18, ell=0.5, mu=0.15,
                        x0=1.0),
), d1=1, d2=1)


@pytest.fixture(scope="session")
def grid():
    return quarterly_grid()


@pytest.fixture(scope="session")
def curves(grid):
    return curve_pair(grid)


@pytest.fixture(scope="session")
def model(grid, curves):
    return calibrate(BASE_DRIVER, grid, curves)


@pytest.fixture(scope="session")
def jumpy_model(grid, curves):
    return calibrate(JUMPY_DRIVER, grid, curves)


@pytest.fixture(scope="session")
def zero_spread_model(grid, curves):
    flat = InitialCurves(risk_free=curves.risk_free,
                         defaultable=curves.risk_free)
    return calibrate(BASE_DRIVER, grid, flat)


@pytest.fixture(scope="session")
def bundle(model):
    """40k exact-transition paths: bias-free workhorse for MC checks."""
    return simulate(model, SimConfig(n_paths=40_000, seed=20260809,
                                     scheme="exact-cir"))


@pytest.fixture(scope="session")
def big_bundle(model):
    """100k paths for the acceptance-grade statistical checks."""
    return simulate(model, SimConfig(n_paths=100_000, seed=318979,
                                     scheme="exact-cir"))
