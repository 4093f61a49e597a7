"""Kernel closed forms against quadrature, plus the derived-kernel calculus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crmhazard.crm import GeneralizedGammaIntensity, InverseWeibullDensity, \
    LebesgueHalfLine
from crmhazard.kernels import (AtomList, atoms_product_integral, contraction_norms,
                               cross_time_integral, eval_kernel,
                               intensity_product_integral, jump_time_integral,
                               make_kernel, pair_product_integral,
                               square_product_integral, time_integral)

from helpers import quad_cross_integral, quad_time_integral

KDL = make_kernel("dykstra_laud")
KRECT = make_kernel("rectangular", tau=1.0)
KOU = make_kernel("ornstein_uhlenbeck", kappa=2.0)
KEXP = make_kernel("exponential")
ALL_KERNELS = [KDL, KRECT, KOU, KEXP]


def random_kernel(rng):
    kind = rng.choice(["dykstra_laud", "rectangular", "ornstein_uhlenbeck",
                       "exponential"])
    if kind == "rectangular":
        return make_kernel(kind, tau=float(rng.uniform(0.2, 2.0)))
    if kind == "ornstein_uhlenbeck":
        return make_kernel(kind, kappa=float(rng.uniform(0.5, 4.0)))
    return make_kernel(kind)


class TestPointwiseValues:
    def test_step_kernel_indicator(self):
        assert eval_kernel(KDL, 5.0, 3.0) == 1.0
        assert eval_kernel(KDL, 2.0, 3.0) == 0.0

    def test_decay_kernel_at_diagonal(self):
        kou = make_kernel("ornstein_uhlenbeck", kappa=2.0)
        assert eval_kernel(kou, 1.5, 1.5) == pytest.approx(2.0, rel=1e-14)

    def test_scale_kernel_unit_arguments(self):
        assert eval_kernel(KEXP, 1.0, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_scale_kernel_rejects_zero_location(self):
        with pytest.raises(ValueError):
            eval_kernel(KEXP, 1.0, 0.0)

    def test_nonnegativity_everywhere(self):
        rng = np.random.default_rng(0)
        ts = rng.uniform(0.0, 10.0, 50)
        xs = rng.uniform(1e-3, 10.0, 50)
        for k in ALL_KERNELS:
            assert np.all(k.eval(ts[:, None], xs[None, :]) >= 0.0)


class TestTimeIntegral:
    def test_step_kernel_value(self):
        assert time_integral(KDL, 3.0, 10.0) == pytest.approx(7.0)

    def test_scale_kernel_value(self):
        # int_0^1 x^-1 e^(-t/x) dt at x=1 equals 1 - 1/e
        assert time_integral(KEXP, 1.0, 1.0) == pytest.approx(
            1.0 - math.exp(-1.0), rel=1e-12)
        assert quad_time_integral(KEXP, 1.0, 1.0) == pytest.approx(
            1.0 - math.exp(-1.0), rel=1e-9)

    def test_decay_kernel_value(self):
        kou = make_kernel("ornstein_uhlenbeck", kappa=1.0)
        want = math.sqrt(2.0) * (1.0 - math.exp(-2.0))   # ~ 1.222806
        assert time_integral(kou, 1.0, 3.0) == pytest.approx(want, rel=1e-12)
        assert quad_time_integral(kou, 1.0, 3.0) == pytest.approx(want, rel=1e-9)

    def test_closed_forms_match_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            k = random_kernel(rng)
            x = float(rng.uniform(0.01, 8.0))
            T = float(rng.uniform(0.1, 12.0))
            assert float(k.time_integral(np.asarray(x), T)) == pytest.approx(
                quad_time_integral(k, x, T), rel=1e-8, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(x=st.floats(0.0, 10.0), t1=st.floats(0.0, 10.0), dt=st.floats(0.0, 5.0))
    def test_monotone_in_horizon(self, x, t1, dt):
        for k in ALL_KERNELS:
            xx = max(x, 1e-6) if k.kind == "exponential" else x
            assert k.time_integral(np.asarray(xx), t1 + dt) >= \
                k.time_integral(np.asarray(xx), t1) - 1e-12


class TestCrossTimeIntegral:
    def test_step_kernel_overlap(self):
        assert cross_time_integral(KDL, 2.0, 5.0, 10.0) == pytest.approx(5.0)

    def test_decay_kernel_total_interaction(self):
        kou = make_kernel("ornstein_uhlenbeck", kappa=1.0)
        # quadrature oracle of int_0^inf 2 e^{-2u} du = 1 at x = y = 0
        assert cross_time_integral(kou, 0.0, 0.0, 400.0) == pytest.approx(1.0,
                                                                          rel=1e-12)

    def test_scale_kernel_published_form(self):
        # (1/(x+y)) (1 - exp(-T (x+y)/(x y))) -> 1/2 at x = y = 1, T large
        assert cross_time_integral(KEXP, 1.0, 1.0, 200.0) == pytest.approx(0.5,
                                                                           rel=1e-12)

    def test_closed_forms_match_quadrature(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            k = random_kernel(rng)
            x = float(rng.uniform(0.01, 8.0))
            y = float(rng.uniform(0.01, 8.0))
            T = float(rng.uniform(0.1, 12.0))
            assert float(k.cross_time_integral(np.asarray(x), np.asarray(y), T)) == \
                pytest.approx(quad_cross_integral(k, x, y, T), rel=1e-8, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(x=st.floats(0.01, 8.0), y=st.floats(0.01, 8.0), T=st.floats(0.1, 10.0))
    def test_symmetry(self, x, y, T):
        for k in ALL_KERNELS:
            a = float(k.cross_time_integral(np.asarray(x), np.asarray(y), T))
            b = float(k.cross_time_integral(np.asarray(y), np.asarray(x), T))
            assert a == pytest.approx(b, rel=1e-13, abs=1e-300)

    def test_overflow_free_at_large_arguments(self):
        kou = make_kernel("ornstein_uhlenbeck", kappa=2.0)
        val = float(kou.cross_time_integral(np.asarray(499.0), np.asarray(498.5),
                                            500.0))
        assert 0.0 < val < 1.0
        assert val == pytest.approx(math.exp(-1.0) - math.exp(-2.0 * 2.5), rel=1e-12)


class TestDerivedKernels:
    def test_jump_time_integral_scaling(self):
        assert jump_time_integral(KDL, 2.0, 3.0, 10.0) == pytest.approx(14.0)

    def test_pair_product_zero_jump(self):
        assert pair_product_integral(KOU, 0.0, 1.0, 2.0, 1.5, 10.0) == 0.0

    def test_square_product_indicator(self):
        # indicator^2 = indicator: (1/T) * overlap length = 2/10 at tau=1, x=5
        assert square_product_integral(KRECT, 1.0, 5.0, 10.0) == pytest.approx(0.2)

    def test_square_product_matches_squared_kernel_quadrature(self):
        # explicit check that the time average of k(u,x)^2 is what kT2 carries,
        # including the decay kernel's 2*kappa normalization
        from scipy import integrate
        for k in (KOU, KEXP, KDL):
            x, T = 1.3, 6.0
            want, _ = integrate.quad(
                lambda u: float(k.eval(u, np.asarray(x))) ** 2, 0.0, T,
                points=[p for p in k.breakpoints(x, T) if 0 < p < T], limit=200)
            got = square_product_integral(k, 1.0, x, T)
            assert got == pytest.approx(want / T, rel=1e-9)

    def test_pair_product_symmetric(self):
        a = pair_product_integral(KOU, 1.2, 0.5, 3.4, 2.0, 8.0)
        b = pair_product_integral(KOU, 3.4, 2.0, 1.2, 0.5, 8.0)
        assert a == pytest.approx(b, rel=1e-13)

    def test_mean_field_interaction_closed_case(self):
        # step kernel, gamma jump part, Lebesgue locations:
        # (1/T) int_0^T (T - w) dw = T/2 at s = 1, x = 0
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        for T in (4.0, 9.0):
            got = intensity_product_integral(KDL, gg, 1.0, 0.0, T)
            assert got == pytest.approx(T / 2.0, rel=1e-9)

    def test_mean_field_zero_jump(self):
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        assert intensity_product_integral(KDL, gg, 0.0, 1.0, 5.0) == 0.0

    def test_posterior_mean_field_below_prior(self):
        # tilting shrinks the first jump moment pointwise
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        tilt = lambda x: 2.0 * np.exp(-np.asarray(x))
        for x in (0.0, 1.0, 3.0):
            prior = intensity_product_integral(KOU, gg, 1.0, x, 12.0)
            tilted = intensity_product_integral(KOU, gg, 1.0, x, 12.0, tilt=tilt)
            assert tilted <= prior + 1e-12

    def test_atom_interaction(self):
        atoms = AtomList(np.array([1.0]), np.array([0.0]))
        # single unit atom at the origin: (1/T) * cross(0, 0, T) = 1 for steps
        assert atoms_product_integral(KDL, atoms, 1.0, 0.0, 10.0) == pytest.approx(1.0)
        assert atoms_product_integral(KDL, AtomList.empty(), 1.0, 0.0, 10.0) == 0.0

    def test_atom_interaction_linear_in_weights(self):
        rng = np.random.default_rng(2)
        atoms = AtomList(rng.uniform(0.5, 2.0, 5), rng.uniform(0.0, 5.0, 5))
        doubled = AtomList(2.0 * atoms.weights, atoms.locations)
        a = atoms_product_integral(KOU, atoms, 1.3, 2.0, 9.0)
        b = atoms_product_integral(KOU, doubled, 1.3, 2.0, 9.0)
        assert b == pytest.approx(2.0 * a, rel=1e-13)


class TestPairwiseQuadratic:
    def test_fast_paths_match_generic(self):
        rng = np.random.default_rng(4)
        w = rng.uniform(0.1, 1.0, 200)
        x = rng.uniform(0.0, 20.0, 200)
        for k, T in ((KDL, 15.0), (KOU, 15.0)):
            fast = k.pairwise_quadratic(w, x, T)
            generic = super(type(k), k).pairwise_quadratic(w, x, T)
            assert fast == pytest.approx(generic, rel=1e-11)

    def test_blocked_prefix_stable_at_large_spans(self):
        rng = np.random.default_rng(6)
        w = rng.uniform(0.1, 1.0, 500)
        x = rng.uniform(0.0, 900.0, 500)
        kou = make_kernel("ornstein_uhlenbeck", kappa=2.0)
        fast = kou.pairwise_quadratic(w, x, 900.0)
        generic = super(type(kou), kou).pairwise_quadratic(w, x, 900.0)
        assert np.isfinite(fast)
        assert fast == pytest.approx(generic, rel=1e-10)


class TestContractionNorms:
    def test_published_closed_form_for_scale_kernel(self):
        gg = GeneralizedGammaIntensity(0.0, 1.0, InverseWeibullDensity())
        for T in (3.0, 25.0):
            norms = contraction_norms(KEXP, gg, T)
            target = gg.moment(2.0) ** 2 / (16.0 * (2.0 * T * T + 3.0 * T + 1.0))
            assert norms.pair_sq_l2 == pytest.approx(target, rel=1e-8)

    def test_decay_kernel_linear_growth(self):
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        kou = make_kernel("ornstein_uhlenbeck", kappa=2.0)
        n = contraction_norms(kou, gg, 200.0)
        # || pair ||^2 ~ (K2)^2 T / (kappa T^2) => 2 T * value -> 2/kappa (K2)^2
        assert 2.0 * 200.0 * n.pair_sq_l2 == pytest.approx(1.0, rel=5e-3)

    def test_cauchy_schwarz_contraction_bound(self):
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        for k, T in ((KOU, 6.0), (KRECT, 6.0)):
            n = contraction_norms(k, gg, T)
            assert math.sqrt(n.contraction1_sq_l2) <= n.pair_sq_l2 * (1.0 + 1e-6)

    def test_nested_route_against_brute_force(self):
        from scipy import integrate
        gg = GeneralizedGammaIntensity(0.0, 1.0)
        T, kap = 4.0, 2.0
        kou = make_kernel("ornstein_uhlenbeck", kappa=kap)
        n = contraction_norms(kou, gg, T)

        def c(x, y):
            if max(x, y) > T:
                return 0.0
            return (math.exp(-kap * abs(x - y))
                    - math.exp(-kap * (2 * T - x - y))) / T

        want, _ = integrate.dblquad(lambda y, x: c(x, y) ** 2, 0, T, 0, T,
                                    epsabs=1e-12)
        assert n.pair_sq_l2 == pytest.approx(want, rel=1e-5)
        want4, _ = integrate.dblquad(lambda y, x: c(x, y) ** 4, 0, T, 0, T,
                                     epsabs=1e-13)
        assert n.pair_l4_fourth == pytest.approx(want4 * gg.moment(4.0) ** 2,
                                                 rel=1e-5)
