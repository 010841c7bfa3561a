import warnings

import numpy as np
from django.test import SimpleTestCase

from bubbles.diagnostics import (
    ChiCutoff,
    bootstrap_monitor,
    check_corridor_parameters,
    chi_cutoff,
    corridor_deviations,
    corridor_exponents,
    decoupling_check,
    energy_sandwich,
    generalized_energy,
    localized_mass,
    localized_momentum,
    mass_quantization,
    monotonicity_trend,
    profile_error_eta,
    profile_error_eta_series,
    refined_v_ratio,
    remainder_size,
    sandwich_floor,
)
from bubbles.exceptions import DecayFitError, InvalidCorridorError, ParameterError
from bubbles.modulation import closed_form_params
from bubbles.profiles import BubbleParams, ProfileInterpolator, smooth_step
from bubbles.spectral import Grid1D, l2_norm, sobolev_norm

from .fixtures import gaussian, grid, profile_chain


class ChiCutoffTests(SimpleTestCase):

    def setUp(self):
        self.chi = ChiCutoff(1.0)

    def test_quadratic_core_and_linear_far_field(self):
        self.assertAlmostEqual(float(self.chi(np.array([0.5]))[0]), 0.125)
        self.assertAlmostEqual(float(self.chi.derivative(np.array([0.5]))[0]), 0.5)
        self.assertAlmostEqual(float(self.chi.derivative(np.array([3.0]))[0]), 3.0 - np.exp(-3.0))
        self.assertAlmostEqual(float(self.chi.derivative(np.array([3.0]), 2)[0]), np.exp(-3.0))

    def test_even_with_odd_gradient(self):
        x = np.linspace(0.1, 4.0, 40)
        self.assertTrue(np.array_equal(self.chi(x), self.chi(-x)))
        self.assertTrue(np.array_equal(self.chi.derivative(x), -self.chi.derivative(-x)))

    def test_pieces_join_continuously(self):
        for joint in (1.0, 2.0):
            below, above = self.chi(np.array([joint - 1e-9, joint + 1e-9]))
            self.assertAlmostEqual(below, above, places=7)
            below, above = self.chi.derivative(np.array([joint - 1e-9, joint + 1e-9]))
            self.assertAlmostEqual(below, above, places=7)

    def test_gradient_matches_finite_differences_on_the_bridge(self):
        e = 1e-6
        for x in (1.2, 1.5, 1.8):
            numeric = (self.chi(np.array([x + e]))[0] - self.chi(np.array([x - e]))[0]) / (2 * e)
            self.assertAlmostEqual(numeric, float(self.chi.derivative(np.array([x]))[0]), places=6)

    def test_convexity_audit(self):
        self.assertGreaterEqual(self.chi.audit(), -1e-12)

    def test_scaling(self):
        chi = chi_cutoff(50.0)
        x = np.array([10.0, 75.0, 200.0])
        self.assertTrue(np.allclose(chi.scaled(x), 2500.0 * chi(x / 50.0)))
        self.assertTrue(np.allclose(chi.scaled_gradient(x), 50.0 * chi.derivative(x / 50.0)))

    def test_arguments(self):
        with self.assertRaises(ParameterError):
            ChiCutoff(0.0)
        with self.assertRaises(ParameterError):
            self.chi.derivative(np.array([1.0]), 5)


class EnergyTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid1D(512, 40.0)
        self.U = gaussian(self.grid, width=2.0)
        self.params = [BubbleParams(lam=1.0, b=0.1, v=0.01, alpha=0.0, gamma=0.0)]
        self.phis = [self.grid.field(np.ones(512))]
        self.chi = ChiCutoff(50.0)

    def test_zero_remainder(self):
        R = self.grid.zeros()
        split = generalized_energy(self.U, self.U, R, self.params, self.phis, self.chi)
        self.assertEqual((split.I, split.E_part, split.L_part), (0.0, 0.0, 0.0))
        self.assertEqual(remainder_size(R, -0.5), 0.0)

    def test_split_adds_up(self):
        R = 0.01 * gaussian(self.grid, center=1.0, width=1.5, phase=0.3)
        split = generalized_energy(self.U + R, self.U, R, self.params, self.phis, self.chi)
        self.assertAlmostEqual(split.I, split.E_part + split.L_part, places=14)
        self.assertNotEqual(split.L_part, 0.0)

    def test_inconsistent_decomposition(self):
        R = 0.01 * gaussian(self.grid)
        with self.assertRaises(ParameterError):
            generalized_energy(self.U, self.U, R, self.params, self.phis, self.chi)

    def test_potential_term_is_halved(self):
        R = 0.01 * gaussian(self.grid, center=1.0, width=1.5)
        energies = []
        for lam in (1.0, 0.5):
            params = [BubbleParams(lam=lam, b=0.0, v=0.0, alpha=0.0, gamma=0.0)]
            energies.append(generalized_energy(self.U + R, self.U, R, params, self.phis, self.chi))
        self.assertEqual(energies[0].L_part, 0.0)
        # 1/2 (1/0.5 - 1/1) ||R||^2
        self.assertAlmostEqual((energies[1].E_part - energies[0].E_part) / l2_norm(R) ** 2, 0.5, places=10)

    def test_remainder_size(self):
        R = gaussian(self.grid, width=1.5)
        expected = sobolev_norm(R, 0.5, homogeneous=True) ** 2 + 4.0 * l2_norm(R) ** 2
        self.assertAlmostEqual(remainder_size(R, -0.5), expected)
        with self.assertRaises(ParameterError):
            remainder_size(R, 0.0)

    def test_localized_functionals(self):
        u = gaussian(self.grid, phase=2.0)
        ones = self.phis[0]
        self.assertAlmostEqual(localized_momentum(u, ones), 2.0 * l2_norm(u) ** 2, places=10)
        self.assertEqual(localized_mass(u, self.grid.zeros(), ones), 0.0)

    def test_v_ratio(self):
        values = np.array([[[0.5, 0.1, 0.25, 0.0, 0.0]], [[0.25, 0.1, 0.05, 0.0, 0.0]]])
        self.assertTrue(np.allclose(refined_v_ratio(values), [[0.5], [0.2]]))


class EtaTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()
        cls.interpolator = ProfileInterpolator(cls.profiles)

    def test_stationary_bubble_has_small_profile_error(self):
        params = [BubbleParams(lam=1.0, b=0.0, v=0.0, alpha=0.0, gamma=0.3)]
        rates = np.array([[0.0, 0.0, 0.0, 0.0, 1.0]])
        result = profile_error_eta(params, rates, self.profiles, grid(), self.interpolator)
        self.assertLess(result.norms[0] / l2_norm(self.profiles.q), 1e-2)

    def test_series_needs_three_samples(self):
        values = np.zeros((2, 1, 5))
        with self.assertRaises(ParameterError):
            profile_error_eta_series([0.0, 1.0], values, 0, self.profiles, grid())


class CorridorTests(SimpleTestCase):

    def setUp(self):
        self.times = np.linspace(-0.8, -0.1, 71)

    def test_parameter_validation(self):
        check_corridor_parameters(0.1, 0.2)
        with self.assertRaises(InvalidCorridorError):
            check_corridor_parameters(0.4, 0.35)
        with self.assertRaises(InvalidCorridorError):
            check_corridor_parameters(0.6, 0.1)

    def test_power_laws_at_the_corridor_rate_pass(self):
        exponents = corridor_exponents(0.1, 0.2)
        quantities = {name: 0.3 * np.abs(self.times) ** e for name, e in exponents.items()}
        report = bootstrap_monitor(self.times, quantities)
        self.assertTrue(report.all_pass)
        self.assertAlmostEqual(report.constants['lambda'], 0.3)

    def test_slower_decay_fails_late(self):
        report = bootstrap_monitor(self.times, {'lambda': np.abs(self.times) ** 3})
        flags = report.flags['lambda']
        self.assertTrue(flags[0])
        self.assertFalse(flags[-1])
        self.assertLess(report.pass_fractions['lambda'], 1.0)

    def test_unknown_corridor(self):
        with self.assertRaises(ParameterError):
            bootstrap_monitor(self.times, {'mass': np.ones(71)})

    def test_closed_form_parameters_sit_on_the_corridor_center(self):
        values = np.array([[p.as_tuple() for p in closed_form_params(1.0, [-4.0, 4.0], [0.0, 0.5], t)]
                           for t in self.times])
        deviations = corridor_deviations(self.times, values, [1.0, 1.0], [-4.0, 4.0], [0.0, 0.5])
        for name, series in deviations.items():
            self.assertLess(series.max(), 1e-12, msg=name)


class MassQuantizationTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid1D(1024, 60.0)
        self.u = gaussian(self.grid, center=-10.0) + gaussian(self.grid, center=10.0)

    def test_each_ball_holds_one_bump(self):
        result = mass_quantization(self.u, [10.0, -10.0], 5.0)
        self.assertTrue(np.allclose(result.ball_masses, np.sqrt(np.pi / 2), rtol=1e-10))
        self.assertLess(result.outside, 1e-10)

    def test_balls_must_be_disjoint(self):
        with self.assertRaises(ParameterError):
            mass_quantization(self.u, [-10.0, 10.0], 10.0)
        with self.assertRaises(ParameterError):
            mass_quantization(self.u, [-10.0, 10.0], 0.0)


class TrendTests(SimpleTestCase):

    def setUp(self):
        self.times = np.linspace(-0.8, -0.4, 41)
        self.R = self.times ** 2
        self.X = np.zeros_like(self.times)

    def test_growth_at_the_main_rate_passes(self):
        I = -0.7 * self.times ** 2 / 2
        report = monotonicity_trend(self.times, I, self.R, self.X)
        self.assertAlmostEqual(report.main_constant, 0.7, places=8)
        self.assertEqual(report.pass_fraction, 1.0)

    def test_decrease_fails(self):
        I = 0.7 * self.times ** 2 / 2
        report = monotonicity_trend(self.times, I, self.R, self.X)
        self.assertEqual(report.main_constant, 0.0)
        self.assertEqual(report.pass_fraction, 0.0)

    def test_needs_five_samples(self):
        with self.assertRaises(ParameterError):
            monotonicity_trend(self.times[:4], self.R[:4], self.R[:4], self.X[:4])

    def test_sandwich(self):
        X = np.abs(self.times) ** 4
        fit = energy_sandwich(self.times, 2.0 * X, X)
        self.assertTrue(fit.holds)
        self.assertAlmostEqual(fit.c2, 2.0)
        self.assertGreaterEqual(fit.c1, 2.0)

    def test_sandwich_without_remainder(self):
        fit = energy_sandwich(self.times, np.zeros(41), np.zeros(41))
        self.assertTrue(fit.holds)

    def test_sandwich_rejects_unrelated_series(self):
        X = np.linspace(0.1, 1.0, 41)
        I = 1e3 * (-1.0) ** np.arange(41)
        with self.assertLogs('bubbles.diagnostics', level='WARNING'):
            fit = energy_sandwich(self.times, I, X)
        self.assertLess(fit.c1, fit.c1_floor)
        self.assertFalse(fit.holds)

    def test_sandwich_negative_energy_is_finite(self):
        X = np.abs(self.times) ** 4
        with warnings.catch_warnings():
            warnings.simplefilter('error')
            fit = energy_sandwich(self.times, -X, X)
        self.assertTrue(np.isfinite(fit.c1))
        self.assertFalse(fit.holds)

    def test_sandwich_is_checked_outside_the_calibration_half(self):
        X = np.abs(self.times) ** 4
        early = np.abs(self.times) >= np.median(np.abs(self.times))
        I = np.where(early, 2.0 * X, 10.0 * X)
        fit = energy_sandwich(self.times, I, X)
        self.assertAlmostEqual(fit.c2, 2.0)
        self.assertTrue(fit.upper_ok[early].all())
        self.assertFalse(fit.holds)

    def test_sandwich_floor(self):
        X = np.abs(self.times) ** 4
        self.assertAlmostEqual(sandwich_floor(0.5), 0.05)
        self.assertFalse(energy_sandwich(self.times, 2.0 * X, X, c1_floor=100.0).holds)
        with self.assertRaises(ParameterError):
            sandwich_floor(0.0)

    def test_sandwich_agreement(self):
        X = np.abs(self.times) ** 4
        fit = energy_sandwich(self.times, 2.0 * X, X)
        self.assertTrue(fit.agrees_with(energy_sandwich(self.times, 2.1 * X, X)))
        self.assertFalse(fit.agrees_with(energy_sandwich(self.times, 10.0 * X, X)))


class DecouplingTests(SimpleTestCase):

    def test_cauchy_profiles_decouple_quadratically(self):
        def f(x):
            return 1.0 / (1.0 + np.asarray(x) ** 2)

        report = decoupling_check(f, f, [0.02, 0.05, 0.1])
        # the cross integral is 2 pi / (eps^-2 + 4)
        expected = 2 * np.pi / (report.eps ** -2 + 4)
        self.assertTrue(np.allclose(report.cross_values, expected, rtol=1e-6))
        self.assertGreaterEqual(report.cross_slope, 1.8)
        self.assertLessEqual(report.cross_slope, 2.2)
        self.assertAlmostEqual(report.concentration_slope, 1.0, places=3)

    def test_ground_state_concentrates_quartically_off_the_plateau(self):
        interpolator = ProfileInterpolator(profile_chain())

        def q(x):
            return interpolator.values('q', x)

        def h(x):
            return 1.0 - smooth_step(np.abs(np.asarray(x, dtype=float)), 0.25)[0]

        report = decoupling_check(q, q, [0.05, 0.1, 0.2], h=h)
        self.assertGreaterEqual(report.concentration_slope, 3.7)
        self.assertLessEqual(report.concentration_slope, 4.3)

    def test_slow_tails_are_rejected(self):
        def slow(x):
            return 1.0 / (1.0 + np.abs(np.asarray(x)))

        with self.assertRaises(DecayFitError):
            decoupling_check(slow, slow, [0.1, 0.2])

    def test_eps_must_be_positive(self):
        def f(x):
            return 1.0 / (1.0 + np.asarray(x) ** 2)

        with self.assertRaises(ParameterError):
            decoupling_check(f, f, [0.1, -0.1])
