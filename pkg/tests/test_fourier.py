import numpy as np
import pytest
from scipy.special import loggamma as scipy_loggamma

from affine_libor import (DampingError, DomainError, InitialCurves,
                          NumericalError, ParameterError, bond_call_price,
                          bond_option_price, cds_spread,
                          cds_spread_model_independent, complex_log_gamma,
                          fourier_quadrature, mc_price_cds, simulate,
                          vulnerable_option_price)
from affine_libor.fourier import DampingVector, QuadratureConfig
from affine_libor.simulation import SimConfig
from oracles import state_space_bond_option, state_space_vulnerable


class TestComplexLogGamma:
    def test_gamma_one_is_zero(self):
        assert complex_log_gamma(1.0 + 0.0j) == pytest.approx(0.0, abs=1e-14)

    def test_gamma_half_is_log_sqrt_pi(self):
        want = 0.5 * np.log(np.pi)
        assert want == pytest.approx(0.5723649429247001, rel=1e-15)
        got = complex_log_gamma(0.5 + 0.0j)
        assert got.real == pytest.approx(want, rel=1e-13)
        assert got.imag == pytest.approx(0.0, abs=1e-13)

    def test_recurrence_modulo_two_pi(self):
        rng = np.random.default_rng(0)
        z = (rng.uniform(-20, 20, 2000)
             + 1j * rng.uniform(-200, 200, 2000))
        z = z[np.abs(z.imag) > 1e-6]
        resid = complex_log_gamma(z + 1.0) - complex_log_gamma(z) - np.log(z)
        assert np.allclose(resid.real, 0.0, atol=1e-11)
        wrapped = np.mod(resid.imag + np.pi, 2 * np.pi) - np.pi
        assert np.allclose(wrapped, 0.0, atol=1e-10)

    def test_against_scipy_loggamma_right_half(self):
        rng = np.random.default_rng(1)
        z = (rng.uniform(0.5, 20, 3000)
             + 1j * rng.uniform(-200, 200, 3000))
        got = complex_log_gamma(z)
        ref = scipy_loggamma(z)
        assert np.max(np.abs(got - ref) / (1 + np.abs(ref))) < 1e-12

    def test_against_scipy_gamma_left_half(self):
        # branch conventions may differ on Re z < 0.5, so compare Gamma
        rng = np.random.default_rng(2)
        z = (rng.uniform(-20, 0.5, 2000)
             + 1j * rng.uniform(0.1, 50, 2000) * rng.choice([-1, 1], 2000))
        got = np.exp(complex_log_gamma(z))
        ref = np.exp(scipy_loggamma(z))
        assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-11

    def test_large_imaginary_arguments(self):
        # the 2-D kernel evaluates far beyond the documented strip
        z = np.array([6.0 + 3000.0j, 2.0 - 8000.0j, 3.5 + 500.0j])
        got = complex_log_gamma(z)
        ref = scipy_loggamma(z)
        assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-13

    def test_pole_raises(self):
        with pytest.raises(DomainError):
            complex_log_gamma(0.0 + 0.0j)
        with pytest.raises(DomainError):
            complex_log_gamma(-3.0 + 0.0j)


class TestFourierQuadrature:
    def test_gaussian_integrand(self):
        res = fourier_quadrature(lambda w: np.exp(-0.5 * w**2), 1,
                                 QuadratureConfig(limit=40.0, nodes=256))
        assert res.value == pytest.approx(1.0 / np.sqrt(2 * np.pi),
                                          rel=1e-12)
        assert res.value == pytest.approx(0.3989422804014327, rel=1e-12)

    def test_symmetric_integrand_has_tiny_imaginary_part(self):
        def f(w):
            return np.exp(-0.3 * w**2) * (np.cos(w) + 1j * np.sin(w))

        res = fourier_quadrature(f, 1, QuadratureConfig(limit=30.0,
                                                        nodes=256))
        assert res.imag < 1e-10

    def test_two_dimensional_gaussian(self):
        def f(w1, w2):
            return np.exp(-0.5 * (w1**2 + w2**2))

        res = fourier_quadrature(f, 2, QuadratureConfig(limit=30.0,
                                                        nodes=128))
        assert res.value == pytest.approx(1.0 / (2 * np.pi), rel=1e-10)

    def test_node_doubling_stability(self):
        def f(w):
            return np.exp(-0.4 * w**2 + 0.3j * w)

        a = fourier_quadrature(f, 1, QuadratureConfig(limit=35.0, nodes=256))
        b = fourier_quadrature(f, 1, QuadratureConfig(limit=35.0, nodes=512))
        assert abs(a.value - b.value) < 1e-12

    def test_tanh_sinh_rule_agrees(self):
        def f(w):
            return np.exp(-0.5 * w**2)

        gl = fourier_quadrature(f, 1, QuadratureConfig(limit=40.0, nodes=512))
        ts = fourier_quadrature(f, 1, QuadratureConfig(
            limit=40.0, nodes=512, rule="tanh-sinh"))
        assert gl.value == pytest.approx(ts.value, rel=1e-9)

    def test_slow_decay_fails_boundary_check(self):
        with pytest.raises(NumericalError):
            fourier_quadrature(lambda w: 1.0 / (1.0 + np.abs(w)), 1,
                               QuadratureConfig(limit=50.0, nodes=256))

    def test_dimension_validation(self):
        with pytest.raises(ParameterError):
            fourier_quadrature(lambda w: w, 3)


class TestCdsSpread:
    def test_zero_spread_model_is_zero(self, zero_spread_model):
        assert cds_spread(zero_spread_model, 8, 0.4, 0.05) \
            == pytest.approx(0.0, abs=1e-14)

    def test_matches_model_independent_formula(self, model, curves):
        for m in (1, 4, 8):
            for pi, c in ((0.0, 0.0), (0.4, 0.05)):
                a = cds_spread(model, m, pi, c)
                b = cds_spread_model_independent(curves, m, pi, c)
                assert abs(a - b) <= 1e-10 * max(abs(b), 1e-12)

    def test_jumpy_model_matches_model_independent(self, jumpy_model,
                                                   curves):
        a = cds_spread(jumpy_model, 6, 0.25, 0.01)
        b = cds_spread_model_independent(curves, 6, 0.25, 0.01)
        assert abs(a - b) <= 1e-10 * abs(b)

    def test_monotone_nonincreasing_in_recovery(self, model):
        spreads = [cds_spread(model, 8, pi, 0.02) for pi in
                   (0.0, 0.2, 0.4, 0.6)]
        assert all(a >= b for a, b in zip(spreads, spreads[1:]))

    def test_matches_monte_carlo(self, model, bundle):
        s_cf = cds_spread(model, 8, 0.4, 0.05)
        res = mc_price_cds(model, bundle, 8, 0.4, 0.05)
        assert abs(s_cf - res.spread.value) < 3 * res.spread.std_error

    def test_bounded_by_simulated_intensity_maximum(self, model, bundle,
                                                    grid, curves):
        # the spread cannot exceed the protection annuity priced at the
        # largest per-period intensity seen anywhere on the paths
        from affine_libor import default_intensity
        m, pi, c = 8, 0.4, 0.05
        lgd = 1 - pi * (1 + c)
        fee = sum(curves.defaultable_at(l - 1) for l in range(1, m + 1))
        upper = 0.0
        for k in range(1, m + 1):
            t_prev = grid.date(k - 1)
            x_prev = bundle.states[:, k - 1, :]
            h_max = float(np.max(default_intensity(model, x_prev, t_prev,
                                                   k - 1)))
            upper += curves.defaultable_at(k) * grid.delta(k - 1) * h_max
        s_cf = cds_spread(model, m, pi, c)
        assert 0.0 <= s_cf <= lgd * upper / fee


class TestCdsModelIndependent:
    def test_no_credit_risk_is_zero(self):
        curves = InitialCurves(risk_free=(0.99, 0.97), defaultable=(0.99,
                                                                    0.97))
        assert cds_spread_model_independent(curves, 2, 0.0, 0.0) == 0.0

    def test_two_period_hand_example(self):
        # displayed formula evaluated by hand:
        # [ (1*0.98 - 0.95*1)/1 + (0.95*0.96 - 0.90*0.98)/0.98 ] / (1 + 0.95)
        curves = InitialCurves(risk_free=(0.98, 0.96),
                               defaultable=(0.95, 0.90))
        term1 = (1.0 * 0.98 - 0.95 * 1.0) / 1.0
        term2 = (0.95 * 0.96 - 0.90 * 0.98) / 0.98
        want = (term1 + term2) / (1.0 + 0.95)
        got = cds_spread_model_independent(curves, 2, 0.0, 0.0)
        assert got == pytest.approx(want, rel=1e-14)
        assert got == pytest.approx(0.031083202511773952, rel=1e-13)

    def test_intensity_route_equality(self, curves):
        # same spread via curve-implied per-period intensities
        m, pi, c = 6, 0.3, 0.02
        lgd = 1 - pi * (1 + c)
        total = 0.0
        for k in range(1, m + 1):
            ratio = (curves.defaultable_at(k - 1) / curves.defaultable_at(k)) \
                * (curves.risk_free_at(k) / curves.risk_free_at(k - 1))
            total += curves.defaultable_at(k) * (ratio - 1.0)
        fee = sum(curves.defaultable_at(l - 1) for l in range(1, m + 1))
        want = lgd * total / fee
        got = cds_spread_model_independent(curves, m, pi, c)
        assert got == pytest.approx(want, rel=1e-13)


class TestBondOptionPrice:
    def test_matches_state_space_oracle(self, model):
        for (i, m, strike, pi) in [(4, 8, 0.94, 0.4), (4, 8, 0.95, 0.4),
                                   (2, 6, 0.955, 0.6), (1, 8, 0.90, 0.2)]:
            ref = state_space_bond_option(model, i, m, strike, pi)
            est = bond_option_price(model, i, m, strike, pi)
            assert abs(est.value - ref) < max(5e-8, 5 * est.quadrature_error)

    def test_monotone_decreasing_in_strike(self, model):
        prices = [bond_option_price(model, 4, 8, k, 0.4).value
                  for k in (0.90, 0.93, 0.95, 0.96)]
        assert all(a >= b - 1e-10 for a, b in zip(prices, prices[1:]))

    def test_strike_to_zero_collapse(self, model, curves):
        i, m, pi = 4, 8, 0.4
        est = bond_option_price(model, i, m, 1e-4, pi)
        want = pi * curves.defaultable_at(i) * curves.risk_free_at(m) \
            / curves.risk_free_at(i) + (1 - pi) * curves.defaultable_at(m) \
            - 1e-4 * curves.defaultable_at(i)
        assert est.value == pytest.approx(want, abs=1e-6)

    def test_damping_invariance(self, model):
        i, m, strike, pi = 4, 8, 0.90, 0.4
        base = bond_option_price(model, i, m, strike, pi)
        alt = bond_option_price(model, i, m, strike, pi,
                                DampingVector(R=(-1.75, -2.25)))
        assert abs(base.value - alt.value) <= 1e-6 * abs(base.value)

    def test_infeasible_damping_raises_with_suggestion(self, model):
        with pytest.raises(DampingError) as err:
            bond_option_price(model, 4, 8, 0.95, 0.4,
                              DampingVector(R=(-900.0, -900.0)))
        assert err.value.suggestion is not None
        bond_option_price(model, 4, 8, 0.95, 0.4, err.value.suggestion)

    def test_damping_shape_validation(self):
        with pytest.raises(ParameterError):
            DampingVector(R=(2.0, -0.5))  # wrong tube for the put kernel
        with pytest.raises(ParameterError):
            DampingVector(R=(0.9,))

    def test_parameter_validation(self, model):
        with pytest.raises(IndexError):
            bond_option_price(model, 5, 5, 0.95, 0.4)
        with pytest.raises(ParameterError):
            bond_option_price(model, 4, 8, 1.2, 0.4)
        with pytest.raises(ParameterError):
            bond_option_price(model, 4, 8, 0.95, 0.0)


class TestVulnerableOptionPrice:
    def test_matches_state_space_oracle(self, model):
        for (k, m, strike, q) in [(4, 8, 0.955, 0.3), (2, 8, 0.93, 0.7),
                                  (1, 4, 0.975, 0.5), (6, 8, 0.98, 0.9)]:
            ref = state_space_vulnerable(model, k, m, strike, q)
            est = vulnerable_option_price(model, k, m, strike, q)
            assert abs(est.value - ref) < max(2e-8, 5 * est.quadrature_error)

    def test_full_recovery_reduces_to_default_free_call(self, model):
        k, m, strike = 4, 8, 0.955
        vul = vulnerable_option_price(model, k, m, strike, 1.0)
        call = bond_call_price(model, k, m, strike)
        assert abs(vul.value - call.value) <= 1e-8

    def test_strike_zero_full_recovery_is_discount_factor(self, model,
                                                          curves):
        est = vulnerable_option_price(model, 4, 8, 1e-6, 1.0)
        assert abs(est.value - curves.risk_free_at(8)) < 1e-6

    def test_monotone_nondecreasing_in_recovery(self, model):
        prices = [vulnerable_option_price(model, 4, 8, 0.955, q).value
                  for q in (0.0, 0.3, 0.7, 1.0)]
        assert all(b >= a - 1e-12 for a, b in zip(prices, prices[1:]))

    def test_monotone_decreasing_in_strike(self, model):
        prices = [vulnerable_option_price(model, 4, 8, k, 0.4).value
                  for k in (0.90, 0.94, 0.97)]
        assert all(a >= b - 1e-12 for a, b in zip(prices, prices[1:]))

    def test_damping_invariance(self, model):
        base = vulnerable_option_price(model, 4, 8, 0.955, 0.3)
        alt = vulnerable_option_price(model, 4, 8, 0.955, 0.3,
                                      DampingVector(R=(2.5,)))
        assert abs(base.value - alt.value) <= 1e-6 * max(base.value, 1e-9)

    def test_price_within_bond_bounds(self, model, curves):
        est = vulnerable_option_price(model, 4, 8, 0.9, 0.5)
        assert 0.0 <= est.value <= curves.risk_free_at(8)


class TestFourierAgainstMonteCarlo:
    def test_bond_option_within_three_se(self, model, bundle):
        from affine_libor import mc_price_bond_option
        for (i, m, strike, pi) in [(4, 8, 0.94, 0.4), (2, 6, 0.955, 0.6)]:
            est = bond_option_price(model, i, m, strike, pi)
            mc = mc_price_bond_option(model, bundle, i, m, strike, pi)
            assert abs(est.value - mc.value) < 3 * mc.std_error

    def test_vulnerable_within_three_se(self, model, bundle):
        from affine_libor import mc_price_vulnerable_option
        for (k, m, strike, q) in [(4, 8, 0.955, 0.3), (2, 8, 0.93, 0.7)]:
            est = vulnerable_option_price(model, k, m, strike, q)
            mc = mc_price_vulnerable_option(model, bundle, k, m, strike, q)
            assert abs(est.value - mc.value) < 3 * mc.std_error

    def test_jumpy_cds_triple_agreement(self, jumpy_model, curves):
        bundle = simulate(jumpy_model, SimConfig(n_paths=30_000,
                                                 steps_per_period=48,
                                                 seed=44))
        s_cf = cds_spread(jumpy_model, 8, 0.4, 0.05)
        s_mi = cds_spread_model_independent(curves, 8, 0.4, 0.05)
        res = mc_price_cds(jumpy_model, bundle, 8, 0.4, 0.05)
        assert abs(s_cf - s_mi) <= 1e-10 * abs(s_mi)
        assert abs(s_cf - res.spread.value) < 3 * res.spread.std_error
