import numpy as np
from django.test import SimpleTestCase

from bubbles.exceptions import GridError, ParameterError, UnderResolvedError
from bubbles.profiles import (
    BubbleParams,
    ProfileInterpolator,
    boundary_data,
    flatten_params,
    localization_set,
    modified_profile,
    multi_bubble,
    boundary_params,
    profile_residual,
    render_bubble,
    smooth_step,
    unflatten_params,
)
from bubbles.runner import psi_scaling
from bubbles.spectral import Grid1D, l2_norm

from .fixtures import grid, profile_chain


class BubbleParamsTests(SimpleTestCase):

    def test_scale_must_be_positive(self):
        with self.assertRaises(ParameterError):
            BubbleParams(lam=0.0, b=0.1, v=0.0, alpha=0.0, gamma=0.0)
        with self.assertRaises(ParameterError):
            BubbleParams(lam=float('nan'), b=0.1, v=0.0, alpha=0.0, gamma=0.0)

    def test_smallness_ceiling(self):
        with self.assertRaises(ParameterError):
            BubbleParams(lam=1.0, b=0.7, v=0.0, alpha=0.0, gamma=0.0)

    def test_flat_vector_layout(self):
        params = [BubbleParams(1.0, 0.1, 0.01, -5.0, 0.0), BubbleParams(2.0, 0.2, 0.04, 5.0, 1.0)]
        vector = flatten_params(params)
        self.assertEqual(vector.tolist(), [1.0, 0.1, 0.01, -5.0, 0.0, 2.0, 0.2, 0.04, 5.0, 1.0])
        self.assertEqual(unflatten_params(vector), params)

    def test_boundary_parameters(self):
        p = boundary_params(2.0, -0.25, 3.0, 0.5)
        self.assertAlmostEqual(p.lam, 0.0625)
        self.assertAlmostEqual(p.b, 0.5)
        self.assertAlmostEqual(p.v, 0.0625)
        self.assertEqual(p.alpha, 3.0)
        self.assertAlmostEqual(p.gamma, 4.0 + 0.5)

    def test_boundary_time_must_be_negative(self):
        with self.assertRaises(ParameterError):
            boundary_params(1.0, 0.0, 0.0, 0.0)
        with self.assertRaises(ParameterError):
            boundary_params(-1.0, -0.5, 0.0, 0.0)


class ModifiedProfileTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()

    def test_reduces_to_ground_state(self):
        qk = modified_profile(self.profiles, 0.0, 0.0)
        self.assertTrue(np.array_equal(qk.values, self.profiles.q.values))

    def test_residual_scales_with_fourth_power(self):
        result = psi_scaling(self.profiles)
        self.assertAlmostEqual(result.slope, 4.0, delta=0.3)

    def test_residual_is_small_for_small_parameters(self):
        small = profile_residual(self.profiles, 0.02, 0.0004)
        large = profile_residual(self.profiles, 0.08, 0.0064)
        self.assertLess(small.l2_norm, large.l2_norm)
        self.assertGreater(small.weighted_sup, 0.0)

    def test_weighted_residual_is_bounded_over_the_sweep(self):
        result = psi_scaling(self.profiles)
        b = result.b_values
        scaled = result.weighted_sups / (b ** 4 + (b * b) ** 2)
        self.assertLessEqual(scaled.max() / scaled.min(), 10.0)

    def test_mass_moves_at_fourth_order(self):
        b = np.array([0.04, 0.08, 0.16])
        mass = l2_norm(self.profiles.q) ** 2
        excess = [abs(l2_norm(modified_profile(self.profiles, value, value * value)) ** 2 - mass) for value in b]
        slope = np.polyfit(np.log(b), np.log(excess), 1)[0]
        self.assertAlmostEqual(slope, 4.0, delta=0.3)


class RenderTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.profiles = profile_chain()
        cls.interpolator = ProfileInterpolator(cls.profiles)

    def test_reference_placement_takes_the_exact_path(self):
        p = BubbleParams(lam=1.0, b=0.1, v=0.01, alpha=0.0, gamma=0.5)
        qk = modified_profile(self.profiles, p.b, p.v)
        rendered = render_bubble(grid(), p, qk)
        self.assertTrue(np.allclose(rendered.values, qk.values * np.exp(0.5j), rtol=0, atol=1e-15))

    def test_interpolated_render_reproduces_grid_values(self):
        p = BubbleParams(lam=1.0, b=0.1, v=0.01, alpha=0.0, gamma=0.5)
        exact = modified_profile(self.profiles, p.b, p.v).values * np.exp(0.5j)
        rendered = self.interpolator.render(grid(), p).values
        inside = np.abs(grid().nodes) <= 60
        self.assertLess(np.max(np.abs(rendered[inside] - exact[inside])), 1e-7)

    def test_scales_below_the_grid_are_refused(self):
        p = BubbleParams(lam=0.1, b=0.1, v=0.01, alpha=0.0, gamma=0.0)
        with self.assertRaises(UnderResolvedError):
            self.interpolator.render(grid(), p)

    def test_coinciding_centers_are_refused(self):
        p = BubbleParams(lam=1.0, b=0.1, v=0.01, alpha=0.0, gamma=0.0)
        with self.assertRaises(ParameterError):
            self.interpolator.render_many(grid(), [p, p])

    def test_superposition_is_the_sum_of_rendered_bubbles(self):
        qk = modified_profile(self.profiles, 0.1, 0.01)
        params = [BubbleParams(lam=1.0, b=0.1, v=0.01, alpha=-20.0, gamma=0.0),
                  BubbleParams(lam=0.5, b=0.1, v=0.01, alpha=20.0, gamma=1.0)]
        total = multi_bubble(grid(), params, [qk, qk])
        expected = render_bubble(grid(), params[0], qk) + render_bubble(grid(), params[1], qk)
        self.assertLess(np.max(np.abs(total.values - expected.values)), 1e-14)
        with self.assertRaises(ParameterError):
            multi_bubble(grid(), params, [qk])
        with self.assertRaises(ParameterError):
            multi_bubble(grid(), [params[0], params[0]], [qk, qk])

    def test_bubble_interaction_decays_with_the_scale(self):
        sim = Grid1D(4096, 40.0)
        q = self.profiles.q
        scales = np.array([0.05, 0.1, 0.2])
        cross = []
        for lam in scales:
            left, right = (BubbleParams(lam=lam, b=0.0, v=0.0, alpha=x, gamma=0.0) for x in (-5.0, 5.0))
            total = multi_bubble(sim, [left, right], [q, q])
            cross.append(l2_norm(total) ** 2 - l2_norm(render_bubble(sim, left, q)) ** 2
                         - l2_norm(render_bubble(sim, right, q)) ** 2)
        slope = np.polyfit(np.log(scales), np.log(np.abs(cross)), 1)[0]
        self.assertAlmostEqual(slope, 2.0, delta=0.3)

    def test_boundary_data_carries_one_ground_state_mass_per_bubble(self):
        sim = Grid1D(2048, 40.0)
        u, params = boundary_data(sim, 2, 1.0, [-8.0, 8.0], [0.0, 0.0], -0.8, self.profiles,
                                  interpolator=self.interpolator)
        self.assertEqual(len(params), 2)
        self.assertAlmostEqual(params[0].lam, 0.16)
        self.assertAlmostEqual(params[0].b, 0.4)
        qk = modified_profile(self.profiles, params[0].b, params[0].v)
        expected = 2 * l2_norm(qk) ** 2
        self.assertAlmostEqual(l2_norm(u) ** 2 / expected, 1.0, delta=1e-2)

    def test_boundary_data_checks_lengths(self):
        with self.assertRaises(ParameterError):
            boundary_data(grid(), 2, 1.0, [0.0], [0.0, 0.0], -0.5, self.profiles)
        with self.assertRaises(ParameterError):
            boundary_data(grid(), 1, 1.0, [0.0], [0.0], -0.5, self.profiles, omegas=[1.0, 2.0])


class LocalizationTests(SimpleTestCase):

    def test_smooth_step_is_flat_at_both_ends(self):
        phi, dphi = smooth_step(np.array([0.0, 4.0, 8.0, 10.0]), 1.0)
        self.assertEqual(phi.tolist(), [1.0, 1.0, 0.0, 0.0])
        self.assertEqual(dphi.tolist(), [0.0, 0.0, 0.0, 0.0])

    def test_partition_of_unity(self):
        loc = localization_set(grid(), [-20.0, 0.0, 20.0])
        total = sum(phi.values.real for phi in loc.phi)
        self.assertLess(np.max(np.abs(total - 1.0)), 1e-14)
        slope = sum(dphi.values.real for dphi in loc.dphi)
        self.assertLess(np.max(np.abs(slope)), 1e-14)
        self.assertAlmostEqual(loc.sigma, 20.0 / 12.0)
        self.assertEqual(loc.K, 3)

    def test_single_bubble_uses_the_whole_box(self):
        loc = localization_set(grid(), [0.0])
        self.assertTrue(np.all(loc.phi[0].values == 1.0))

    def test_centers_must_increase(self):
        with self.assertRaises(ParameterError):
            localization_set(grid(), [5.0, -5.0])

    def test_sigma_must_resolve_on_the_grid(self):
        with self.assertRaises(GridError):
            localization_set(grid(), [0.0, 0.001])
