import numpy as np
from django.test import SimpleTestCase

from bubbles.exceptions import DecayFitError, ParameterError
from bubbles.ground_state import (
    decay_exponent,
    gn_functional,
    periodic_benjamin_ono,
    pohozaev_defect,
    solve_ground_state,
)
from bubbles.spectral import Grid1D

from .fixtures import grid, ground_state, random_smooth_field


class GroundStateTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gs = ground_state()

    def test_residual_meets_tolerance(self):
        self.assertLessEqual(self.gs.residual_l2, 1e-10)
        self.assertEqual(self.gs.nonlinearity_power, 3)

    def test_profile_is_even_and_positive(self):
        q = self.gs.values
        self.assertLess(np.max(np.abs(q - grid().reflect(q))), 1e-12)
        self.assertGreater(q.min(), 0.0)
        self.assertEqual(int(np.argmax(q)), grid().n_points // 2)

    def test_tail_decays_like_inverse_square(self):
        fit = decay_exponent(self.gs, (20.0, 40.0))
        self.assertAlmostEqual(fit.exponent, 2.0, delta=0.1)
        self.assertIsNotNone(self.gs.decay_fit)

    def test_decay_window_must_stay_clear_of_the_boundary(self):
        with self.assertRaises(DecayFitError):
            decay_exponent(self.gs, (20.0, 90.0))
        with self.assertRaises(DecayFitError):
            decay_exponent(self.gs, (5.0, 30.0))

    def test_gagliardo_nirenberg_functional(self):
        self.assertAlmostEqual(gn_functional(self.gs.q, self.gs), 1.0, delta=1e-5)
        rng = np.random.default_rng(3)
        for _ in range(20):
            self.assertLess(gn_functional(random_smooth_field(grid(), rng), self.gs), 1.0)

    def test_gn_functional_rejects_zero_field(self):
        with self.assertRaises(ParameterError):
            gn_functional(grid().zeros(), self.gs)

    def test_initial_amplitude_does_not_change_the_solution(self):
        other = solve_ground_state(grid(), amplitude=2.0)
        self.assertLess(np.max(np.abs(other.values - self.gs.values)), 1e-8)

    def test_pohozaev_identities(self):
        energy, kinetic = pohozaev_defect(self.gs)
        self.assertLess(abs(energy) / self.gs.mass, 1e-3)
        self.assertLess(abs(kinetic), 1e-3)


class SolverArgumentTests(SimpleTestCase):

    def test_unsupported_power(self):
        with self.assertRaises(ParameterError):
            solve_ground_state(Grid1D(256, 40.0), power=4)

    def test_tolerance_range(self):
        with self.assertRaises(ParameterError):
            solve_ground_state(Grid1D(256, 40.0), tol=1e-2)


class BenjaminOnoTests(SimpleTestCase):

    def test_quadratic_solve_matches_periodic_soliton(self):
        gs = ground_state(power=2)
        oracle = periodic_benjamin_ono(grid())
        self.assertLess(np.max(np.abs(gs.values - oracle.values.real)), 1e-8)

    def test_periodic_soliton_approaches_line_soliton(self):
        g = Grid1D(4096, 400.0)
        oracle = periodic_benjamin_ono(g).values.real
        x = g.nodes
        window = np.abs(x) <= 20
        line = 2.0 / (1.0 + x[window] ** 2)
        k = 2 * np.pi / g.length
        self.assertLess(np.max(np.abs(oracle[window] - line)), 10 * k * k)

    def test_oracle_needs_a_wide_torus(self):
        with self.assertRaises(ParameterError):
            periodic_benjamin_ono(Grid1D(64, 6.0))
