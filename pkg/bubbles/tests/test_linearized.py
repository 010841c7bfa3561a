import numpy as np
from django.test import SimpleTestCase

from bubbles.exceptions import KernelCompatibilityError, ParameterError
from bubbles.linearized import (
    apply_L,
    check_smallness,
    coercivity_rayleigh,
    kernel_identity_residuals,
    localization_weight,
    localized_coercivity_check,
    parity_defects,
    scal,
    solve_constrained,
    solve_varrho,
    varrho_residual,
)
from bubbles.spectral import derivative, l2_norm, scaling_operator

from .fixtures import ground_state, profile_chain


class ProfileChainTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()
        cls.gs = cls.profiles.gs

    def test_generalized_kernel_identities(self):
        for name, value in kernel_identity_residuals(self.profiles).items():
            self.assertLessEqual(value, 1e-4, msg=name)

    def test_scaling_direction_is_mapped_to_minus_q(self):
        residual = apply_L('+', scaling_operator(self.gs.q), self.gs) + self.gs.q
        self.assertLess(l2_norm(residual) / l2_norm(self.gs.q), 1e-4)

    def test_positive_pairings(self):
        self.assertGreater(self.profiles.e1, 0.0)
        self.assertGreater(self.profiles.p1, 0.0)

    def test_profiles_carry_their_parity(self):
        for name, defect in parity_defects(self.profiles).items():
            self.assertLess(defect, 1e-10, msg=name)

    def test_every_solve_met_its_tolerance(self):
        self.assertEqual(len(self.profiles.solve_residuals), 8)
        for name, residual in self.profiles.solve_residuals.items():
            self.assertLessEqual(residual, 1e-10, msg=name)

    def test_varrho_is_linear_in_b_and_v(self):
        self.assertLess(varrho_residual(self.gs, self.profiles, 0.1, 0.01), 1e-8)
        combined = solve_varrho(self.gs, self.profiles, 0.2, 0.0)
        self.assertLess(l2_norm(combined - 0.2 * self.profiles.varrho_b), 1e-14)

    def test_smallness_ceiling(self):
        check_smallness(0.5, 0.25)
        with self.assertRaises(ParameterError):
            check_smallness(0.6, 0.0)


class ConstrainedSolveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gs = ground_state()

    def test_rhs_in_the_kernel_is_rejected(self):
        with self.assertRaises(KernelCompatibilityError):
            solve_constrained('-', self.gs.q, 'even', 1e-10, self.gs)

    def test_rhs_with_wrong_parity_is_rejected(self):
        with self.assertRaises(ParameterError):
            solve_constrained('-', self.gs.q, 'odd', 1e-10, self.gs)

    def test_unknown_sign(self):
        with self.assertRaises(ParameterError):
            apply_L('0', self.gs.q, self.gs)

    def test_even_solve_against_q(self):
        solution = solve_constrained('+', self.gs.q, 'even', 1e-10, self.gs)
        residual = apply_L('+', solution, self.gs) - self.gs.q
        self.assertLess(l2_norm(residual), 1e-9)
        # odd kernel direction plays no part in an even solve
        dq = derivative(self.gs.q)
        self.assertLess(abs(np.vdot(solution.values, dq.values)) * self.gs.grid.spacing, 1e-10)


class CoercivityTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()

    def test_projected_form_is_coercive(self):
        self.assertGreater(coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=100), 0.0)

    def test_unprojected_form_has_a_negative_direction(self):
        value = coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=100, project=False)
        self.assertLess(value, 0.0)

    def test_two_digits_under_mode_refinement(self):
        coarse = coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=200)
        fine = coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=400)
        self.assertGreater(fine, 0.0)
        self.assertLessEqual(abs(fine - coarse), 1e-2 * abs(fine))

    def test_localized_form_is_coercive_at_radius_50(self):
        self.assertGreater(localized_coercivity_check(self.profiles.gs, self.profiles, A=50.0, a=0.5), 0.0)


class LocalizationWeightTests(SimpleTestCase):

    def test_weight_matches_its_pieces(self):
        x = np.array([0.0, 40.0, -50.0, 150.0, -400.0])
        w = localization_weight(x, A=50.0, a=0.5)
        self.assertEqual(w[0], 1.0)
        self.assertEqual(w[1], 1.0)
        self.assertAlmostEqual(w[3], (150.0 / 50.0) ** -0.5)
        self.assertAlmostEqual(w[4], 8.0 ** -0.5)

    def test_bridge_is_continuous_and_monotone(self):
        x = np.linspace(49.0, 101.0, 2001)
        w = localization_weight(x, A=50.0, a=0.5)
        self.assertTrue(np.all(np.diff(w) <= 1e-12))
        self.assertLess(np.max(np.abs(np.diff(w))), 1e-3)


class ScalTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()
        cls.gs = cls.profiles.gs

    def test_ground_state_sees_only_its_own_mass(self):
        self.assertAlmostEqual(scal(self.gs.q, self.gs, self.profiles) / self.gs.mass ** 2, 1.0, places=8)

    def test_imaginary_ground_state_sees_only_rho(self):
        expected = float(np.sum(self.gs.values * self.profiles.rho.values.real) * self.gs.grid.spacing) ** 2
        value = scal(self.gs.q * 1j, self.gs, self.profiles)
        self.assertAlmostEqual(value / expected, 1.0, places=6)

    def test_zero_field(self):
        self.assertEqual(scal(self.gs.grid.zeros(), self.gs, self.profiles), 0.0)

    def test_localized_check_arguments(self):
        with self.assertRaises(ParameterError):
            localized_coercivity_check(self.gs, self.profiles, A=50.0, a=1.5)
        with self.assertRaises(ParameterError):
            localized_coercivity_check(self.gs, self.profiles, A=-1.0)
