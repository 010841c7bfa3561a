import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings

from bubbles.exceptions import ConfigError
from bubbles.serializers import (
    config_echo,
    config_hash,
    default_tolerances,
    parse_config,
    validate_config,
)

MINIMAL = {'K': 1, 'omega': 1.0, 'centers': [0.0], 'thetas': [0.0], 't_start': -1.0, 't_stop': -0.5}


def config(**overrides):
    return {**MINIMAL, **overrides}


class RunConfigTests(SimpleTestCase):

    @override_settings(HALFWAVE={
        'DEFAULT_N_POINTS': 4096, 'DEFAULT_LENGTH': 200.0, 'GROUND_STATE_TOL': 1e-11,
        'PROFILE_TOL': 1e-10, 'COMPATIBILITY_TOL': 1e-5, 'DECOMPOSITION_TOL': 1e-10,
        'OUTPUT_DIR': 'runs',
    })
    def test_minimal_config_is_completed_with_defaults(self):
        result = validate_config(MINIMAL)
        self.assertEqual(result['grid'], {'n_points': 4096, 'length': 200.0})
        self.assertEqual(result['direction'], 'forward')
        self.assertEqual(result['nonlinearity'], 'focusing')
        self.assertEqual(result['dt_factor'], 0.1)
        self.assertEqual(result['observer_stride'], 10)
        self.assertEqual(result['A_virial'], 50.0)
        self.assertEqual(result['A_sweep'], [])
        self.assertIsNone(result['omegas'])
        self.assertIsNone(result['sigma'])
        self.assertEqual(result['output_dir'], 'runs')
        self.assertEqual(result['tolerances'], default_tolerances())

    def test_partial_tolerances_keep_the_other_defaults(self):
        result = validate_config(config(tolerances={'compatibility': 1e-3}))
        self.assertEqual(result['tolerances']['compatibility'], 1e-3)
        self.assertEqual(result['tolerances']['profile'], default_tolerances()['profile'])

    def test_unknown_keys_are_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(omgea=2.0))
        self.assertIn('omgea', ctx.exception.errors)

    def test_unknown_tolerance(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(tolerances={'newton': 1e-8}))
        self.assertIn('tolerances', ctx.exception.errors)

    def test_not_an_object(self):
        with self.assertRaises(ConfigError):
            validate_config([1, 2, 3])

    def test_corridor_exponents_must_stay_positive(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(delta=0.4, varsigma=0.35))
        self.assertIn('delta', ctx.exception.errors)

    def test_localization_scale_must_resolve(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(sigma=0.001))
        self.assertIn('centers', ctx.exception.errors)

    def test_window_must_end_before_zero(self):
        for start, stop in ((-0.5, -1.0), (-1.0, 0.1), (-1.0, -1.0)):
            with self.assertRaises(ConfigError) as ctx:
                validate_config(config(t_start=start, t_stop=stop))
            self.assertIn('t_stop', ctx.exception.errors)

    def test_per_bubble_lists_follow_K(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(K=2, centers=[-5.0, 5.0]))
        self.assertIn('thetas', ctx.exception.errors)
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(K=2, centers=[5.0, -5.0], thetas=[0.0, 0.0]))
        self.assertIn('centers', ctx.exception.errors)
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(omegas=[-1.0]))
        self.assertIn('omegas', ctx.exception.errors)

    def test_scalar_ranges(self):
        for overrides, field in (({'omega': 0.0}, 'omega'), ({'dt_factor': 1.5}, 'dt_factor'),
                                 ({'dt_min': 1.0}, 'dt_min'), ({'ball_radius': 0.0}, 'ball_radius'),
                                 ({'centers': [150.0]}, 'centers')):
            with self.assertRaises(ConfigError) as ctx:
                validate_config(config(**overrides))
            self.assertIn(field, ctx.exception.errors, msg=overrides)

    def test_overlapping_balls(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(K=2, centers=[-1.0, 1.0], thetas=[0.0, 0.0], ball_radius=1.0))
        self.assertIn('ball_radius', ctx.exception.errors)

    def test_grid_must_be_a_power_of_two(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config(grid={'n_points': 1000, 'length': 40.0}))
        self.assertIn('grid', ctx.exception.errors)

    def test_message_names_the_source(self):
        with self.assertRaisesMessage(ConfigError, 'experiment.json: omega'):
            validate_config(config(omega=-1.0), source='experiment.json')


class CanonicalFormTests(SimpleTestCase):

    def setUp(self):
        self.config = validate_config(config(grid={'n_points': 2048, 'length': 40.0}))

    def test_echo_is_sorted_json(self):
        echo = config_echo(self.config)
        self.assertEqual(json.loads(echo), self.config)
        keys = list(json.loads(echo))
        self.assertEqual(keys, sorted(keys))
        self.assertTrue(echo.endswith('\n'))

    def test_hash_ignores_the_output_location(self):
        moved = {**self.config, 'output_dir': '/elsewhere'}
        self.assertEqual(config_hash(moved), config_hash(self.config))
        self.assertRegex(config_hash(self.config), r'^[0-9a-f]{12}$')

    def test_hash_follows_the_physics(self):
        other = validate_config(config(grid={'n_points': 2048, 'length': 40.0}, omega=1.5))
        self.assertNotEqual(config_hash(other), config_hash(self.config))


class ParseConfigTests(SimpleTestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_reads_a_file(self):
        path = self.root / 'run.json'
        path.write_text(json.dumps(MINIMAL))
        self.assertEqual(parse_config(path)['K'], 1)

    def test_missing_file(self):
        with self.assertRaisesMessage(ConfigError, 'not found'):
            parse_config(self.root / 'absent.json')

    def test_invalid_json(self):
        path = self.root / 'broken.json'
        path.write_text('{"K": 1,')
        with self.assertRaisesMessage(ConfigError, 'invalid JSON'):
            parse_config(path)
