"""Defaultable affine LIBOR model pricing library.

Calibrates families of exponential martingales to default-free and
defaultable discount curves, evaluates the implied rates and default
intensities, prices CDS and (vulnerable) bond options in closed or
semi-analytic form, and cross-checks everything against a Cox-construction
Monte Carlo oracle.
"""
from .affine import (AffineComponentSpec, ExponentPair, ProductAffineSpec,
                     component_domain_bound, exponents_analytic,
                     exponents_ode, gamma_x_lower_bound, martingale_value,
                     product_exponents)
from .calibration import (CalibratedModel, ConditionsReport, InitialCurves,
                          TenorGrid, assemble, calibrate, fit_risk_free,
                          fit_spread, verify_conditions)
from .errors import (AssemblyError, CalibrationError, DampingError,
                     DomainError, NumericalError, ParameterError,
                     ValidationError)
from .fourier import (DampingVector, QuadratureConfig, bond_call_price,
                      bond_option_price, cds_spread,
                      cds_spread_model_independent, complex_log_gamma,
                      fourier_quadrature, vulnerable_option_price)
from .rates import (RateCoefficients, aggregate_coefficients,
                    default_intensity, defaultable_libor, forward_measure_exponents,
                    hazard_at_tenor, libor, restricted_forward_exponents,
                    spread, survival_process)
from .results import CdsMcResult, PriceEstimate
from .simulation import (PathBundle, SimConfig, crossing_times,
                         martingale_table, mc_expect_forward, mc_price_cds,
                         mc_price_bond_option, mc_price_vulnerable_option,
                         simulate, survival_table)

__version__ = "0.1.0"
