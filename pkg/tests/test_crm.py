"""Jump-intensity math and truncated CRM sampling against quadrature/MC oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from crmhazard.crm import (GeneralizedGammaIntensity, GridMeasure,
                           InverseWeibullDensity, LebesgueHalfLine,
                           choose_jump_floor, laplace_exponent, sample_crm)
from crmhazard.errors import DivergenceError, TruncationBudgetError

from helpers import (bisect_inverse_tail, quad_jump_moment, quad_tail_mass,
                     quad_tilted_moment)


def gg(sigma=0.0, gamma=1.0, base=None):
    return GeneralizedGammaIntensity(sigma, gamma, base or LebesgueHalfLine())


class TestLevyDensity:
    def test_gamma_case_collapses_to_exponential_over_v(self):
        assert gg().levy_density(1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_half_stable_value(self):
        # e^-2 / (1 * Gamma(1/2)) at v = 1
        expected = math.exp(-2.0) / math.gamma(0.5)
        assert gg(0.5, 2.0).levy_density(1.0) == pytest.approx(expected, rel=1e-14)

    def test_pole_at_origin(self):
        vals = gg().levy_density(np.array([1e-2, 1e-4, 1e-6]))
        assert vals[2] > vals[1] > vals[0]
        assert vals[2] * 1e-6 == pytest.approx(1.0, rel=1e-4)  # ~ 1/v

    def test_domain_error(self):
        with pytest.raises(ValueError):
            gg().levy_density(0.0)
        with pytest.raises(ValueError):
            gg().levy_density(-1.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            GeneralizedGammaIntensity(1.0, 1.0)
        with pytest.raises(ValueError):
            GeneralizedGammaIntensity(0.2, 0.0)


class TestMoments:
    def test_gamma_first_and_second_moment(self):
        assert gg().moment(1.0) == pytest.approx(1.0, rel=1e-14)
        assert gg().moment(2.0) == pytest.approx(1.0, rel=1e-14)

    def test_half_stable_second_moment(self):
        # quadrature oracle: int s^0.5 e^-s ds / Gamma(0.5) = Gamma(1.5)/Gamma(0.5)
        assert gg(0.5).moment(2.0) == pytest.approx(0.5, rel=1e-13)

    def test_against_quadrature_grid(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            sigma = rng.uniform(0.0, 0.9)
            gamma = rng.uniform(0.2, 5.0)
            c = rng.uniform(0.95, 4.5)
            got = gg(sigma, gamma).moment(c)
            want = quad_jump_moment(sigma, gamma, c)
            assert got == pytest.approx(want, rel=1e-9)

    def test_tilted_moment_matches_quadrature(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            sigma = rng.uniform(0.0, 0.9)
            gamma = rng.uniform(0.3, 3.0)
            shift = rng.uniform(0.0, 6.0)
            order = rng.integers(1, 5)
            got = gg(sigma, gamma).tilted_moment(float(order), shift)
            want = quad_tilted_moment(sigma, gamma, float(order), shift)
            assert got == pytest.approx(want, rel=1e-9)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            gg().moment(0.0)


class TestTailMass:
    def test_gamma_case_is_exponential_integral(self):
        assert gg().tail_mass(1.0) == pytest.approx(float(special.exp1(1.0)),
                                                    rel=1e-13)

    def test_half_stable_against_quadrature(self):
        got = gg(0.5).tail_mass(1.0)
        want = quad_tail_mass(0.5, 1.0, 1.0)   # ~ 0.100509
        assert got == pytest.approx(want, rel=1e-11)
        assert got == pytest.approx(0.10050908332, rel=1e-9)

    def test_vanishes_at_infinity(self):
        assert gg().tail_mass(500.0) < 1e-200

    @settings(max_examples=40, deadline=None)
    @given(sigma=st.floats(0.0, 0.9), gamma=st.floats(0.2, 4.0),
           v=st.floats(1e-6, 20.0))
    def test_strictly_decreasing(self, sigma, gamma, v):
        intensity = gg(sigma, gamma)
        assert intensity.tail_mass(v) > intensity.tail_mass(v * 1.5)

    def test_quadrature_agreement_random_grid(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            sigma = rng.uniform(0.0, 0.9)
            gamma = rng.uniform(0.3, 4.0)
            v = rng.uniform(1e-4, 8.0)
            got = gg(sigma, gamma).tail_mass(v)
            want = quad_tail_mass(sigma, gamma, v)
            assert got == pytest.approx(want, rel=1e-9)


class TestInverseTailMass:
    def test_forward_composition(self):
        intensity = gg()
        u = intensity.tail_mass(1.0)
        assert intensity.inverse_tail_mass(u) == pytest.approx(1.0, abs=1e-9)

    def test_known_value_from_bisected_quadrature(self):
        got = gg().inverse_tail_mass(1.0)
        want = bisect_inverse_tail(0.0, 1.0, 1.0)  # ~ 0.2649
        assert got == pytest.approx(want, rel=1e-8)
        assert got == pytest.approx(0.2649, abs=2e-4)

    @settings(max_examples=40, deadline=None)
    @given(sigma=st.floats(0.0, 0.85), gamma=st.floats(0.3, 3.0),
           logu=st.floats(-8.0, 5.0))
    def test_round_trip(self, sigma, gamma, logu):
        intensity = gg(sigma, gamma)
        u = math.exp(logu)
        v = intensity.inverse_tail_mass(u)
        assert abs(intensity.tail_mass(v) - u) <= 1e-10 * max(1.0, u)

    def test_round_trip_tight_at_moderate_levels(self):
        intensity = gg(0.3, 2.0)
        for u in (1e-6, 1e-2, 0.5, 3.0, 20.0):
            v = intensity.inverse_tail_mass(u)
            assert abs(intensity.tail_mass(v) - u) <= 1e-10

    def test_domain_error(self):
        with pytest.raises(ValueError):
            gg().inverse_tail_mass(0.0)


class TestSamplerInternals:
    def test_fast_inverse_matches_root_finder(self):
        from crmhazard.crm import _fast_inverse_tail
        for sigma, gamma in ((0.0, 1.0), (0.0, 2.5), (0.5, 1.0)):
            intensity = gg(sigma, gamma)
            us = np.geomspace(1e-9, 30.0, 60)
            fast = _fast_inverse_tail(intensity, us)
            slow = np.array([intensity.inverse_tail_mass(float(u)) for u in us])
            np.testing.assert_allclose(fast, slow, rtol=1e-9)

    def test_jump_floor_solves_budget_equation(self):
        for sigma, gamma in ((0.0, 1.0), (0.4, 0.7)):
            intensity = gg(sigma, gamma)
            eps = choose_jump_floor(intensity, 1e-4)
            assert intensity.small_jump_mass(eps) == pytest.approx(
                1e-4 * intensity.moment(1.0), rel=1e-10)


class TestSampleCrm:
    def test_jumps_strictly_decreasing_in_arrival_order(self):
        crm = sample_crm(gg(), (0.0, 10.0), np.random.default_rng(0))
        ordered = np.sort(crm.jumps)[::-1]
        assert np.all(np.diff(ordered) < 0.0)
        assert np.all(crm.jumps >= crm.jump_floor)
        assert np.all(np.diff(crm.locations) >= 0.0)  # sorted by location

    def test_mc_mean_and_variance_of_total_mass(self):
        # E[mass] = |window| * moment(1), Var = |window| * moment(2)
        intensity = gg()
        totals = np.array([
            sample_crm(intensity, (0.0, 10.0), np.random.default_rng(500 + r)).total_mass()
            for r in range(4000)])
        se_mean = totals.std(ddof=1) / math.sqrt(totals.size)
        assert abs(totals.mean() - 10.0) < 3.0 * se_mean + 10.0 * 1e-4
        var = totals.var(ddof=1)
        se_var = var * math.sqrt(2.0 / (totals.size - 1))
        assert abs(var - 10.0) < 3.5 * se_var

    def test_truncation_budget_enforced(self):
        intensity = gg()
        with pytest.raises(TruncationBudgetError):
            sample_crm(intensity, (0.0, 5.0), np.random.default_rng(1),
                       jump_floor=0.1, truncation_budget=1e-6)

    def test_expected_dropped_mass_metadata(self):
        intensity = gg(0.3, 1.5)
        crm = sample_crm(intensity, (0.0, 4.0), np.random.default_rng(3),
                         truncation_budget=1e-4)
        mass = intensity.base_measure.window_mass(0.0, 4.0)
        assert crm.expected_dropped_mass == pytest.approx(
            mass * intensity.small_jump_mass(crm.jump_floor), rel=1e-12)
        assert crm.expected_dropped_mass <= 1e-4 * mass * intensity.moment(1.0) * (1 + 1e-9)

    def test_inverse_weibull_locations_follow_restricted_measure(self):
        base = InverseWeibullDensity()
        intensity = gg(0.0, 1.0, base)
        crm = sample_crm(intensity, (0.0, 50.0), np.random.default_rng(8))
        # CDF transform of locations should be uniform (KS test, fixed seed)
        total = base.window_mass(0.0, 50.0)
        u = np.asarray(base.cumulative_mass(crm.locations)) / total
        from scipy import stats
        assert stats.kstest(u, "uniform").pvalue > 1e-3

    def test_grid_measure_sampling(self):
        base = GridMeasure((0.5, 1.5, 2.5), (1.0, 2.0, 1.0))
        intensity = gg(0.0, 1.0, base)
        crm = sample_crm(intensity, (0.0, 3.0), np.random.default_rng(5))
        assert set(np.unique(crm.locations)) <= {0.5, 1.5, 2.5}
        assert crm.expected_dropped_mass <= 1e-4 * 4.0 * (1 + 1e-9)


class TestLaplaceExponent:
    def test_zero_function(self):
        assert laplace_exponent(gg(), lambda x: 0.0, window=(0.0, 1.0)) == 0.0

    def test_gamma_process_log_formula(self):
        # int (1 - e^-us) e^-s/s ds = log(1 + u); window [0,1] has unit mass
        val = laplace_exponent(gg(), lambda x: 1.0, window=(0.0, 1.0))
        assert val == pytest.approx(math.log(2.0), rel=1e-10)

    def test_nested_quadrature_oracle(self):
        # recompute with an explicitly nested s-then-x quadrature
        from helpers import quad_jump_density_integral
        intensity = gg(0.4, 1.3)
        g = lambda x: 1.0 / (1.0 + x)

        def psi_of_x(x):
            return quad_jump_density_integral(
                0.4, 1.3, lambda s: 1.0 - math.exp(-s * g(x)))

        from scipy import integrate
        want, _ = integrate.quad(psi_of_x, 0.0, 2.0, limit=200)
        got = laplace_exponent(intensity, g, window=(0.0, 2.0))
        assert got == pytest.approx(want, rel=1e-8)

    def test_mc_check_against_sampled_paths(self):
        intensity = gg()
        g = lambda x: 1.0
        exponent = laplace_exponent(intensity, g, window=(0.0, 1.0))
        vals = []
        for r in range(4000):
            crm = sample_crm(intensity, (0.0, 1.0), np.random.default_rng(9000 + r))
            vals.append(math.exp(-crm.integrate(lambda x: np.ones_like(x))))
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - math.exp(-exponent)) < 3.0 * se + 1e-4

    def test_divergence_detected(self):
        # exponential-kernel-like g under Lebesgue: int (1 - e^{-s/x}) rho lambda
        # diverges logarithmically in x
        with pytest.raises(DivergenceError):
            laplace_exponent(gg(), lambda x: 1.0 / max(x, 1e-12),
                             window=(0.0, np.inf))


class TestBaseMeasures:
    def test_lebesgue_window_mass_additive(self):
        base = LebesgueHalfLine()
        assert base.window_mass(0.0, 3.0) == pytest.approx(
            base.window_mass(0.0, 1.2) + base.window_mass(1.2, 3.0))

    def test_inverse_weibull_mass_matches_quadrature(self):
        from scipy import integrate
        base = InverseWeibullDensity()
        for x in (0.3, 1.0, 7.0, 120.0):
            want, _ = integrate.quad(lambda t: float(base.density(t)), 0.0, x,
                                     limit=200)
            assert base.window_mass(0.0, x) == pytest.approx(want, rel=1e-9)

    def test_inverse_weibull_density_nonnegative(self):
        base = InverseWeibullDensity()
        xs = np.linspace(0.0, 10.0, 101)
        assert np.all(base.density(xs) >= 0.0)
