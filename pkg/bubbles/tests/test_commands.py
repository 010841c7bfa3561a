import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import connections
from django.test import SimpleTestCase, override_settings

from bubbles.diagnostics import SandwichFit
from bubbles.management.commands.verify import Command

LOCMEM = {'default': {'BACKEND': 'django.core.cache.backends.locmem.LocMemCache', 'LOCATION': 'command-tests'}}


@override_settings(CACHES=LOCMEM)
class CommandTests(SimpleTestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def call(self, *args):
        stdout = StringIO()
        call_command(*args, stdout=stdout)
        return stdout.getvalue()

    def write_config(self, **overrides):
        config = {
            'K': 1, 'omega': 1.0, 'centers': [0.0], 'thetas': [0.0],
            't_start': -0.5, 't_stop': -0.4,
            'grid': {'n_points': 2048, 'length': 40.0},
            'tolerances': {'compatibility': 1e-3},
            **overrides,
        }
        path = self.root / 'config.json'
        path.write_text(json.dumps(config))
        return path

    def test_verify_passes_cheap_checks(self):
        output = self.call('verify', '--resolution', '1024', '--length', '60',
                           '--checks', 'operators', 'checkpoint')
        self.assertIn('PASS [D, Lambda] = D', output)
        self.assertIn('All 6 checks passed', output)

    def test_verify_quiet_prints_nothing_on_success(self):
        output = self.call('verify', '--resolution', '1024', '--length', '60',
                           '--checks', 'checkpoint', '--quiet')
        self.assertEqual(output, '')

    def test_run_with_missing_config_is_a_validation_error(self):
        with self.assertRaises(CommandError) as cm:
            self.call('run', '--config', str(self.root / 'missing.json'))
        self.assertEqual(cm.exception.returncode, 1)

    def test_run_with_invalid_config_is_a_validation_error(self):
        path = self.write_config(K=3)
        with self.assertRaises(CommandError) as cm:
            self.call('run', '--config', str(path))
        self.assertEqual(cm.exception.returncode, 1)

    def test_unresolvable_run_is_a_numerical_failure(self):
        path = self.write_config()
        with self.assertRaises(CommandError) as cm:
            self.call('run', '--config', str(path), '--out', str(self.root / 'runs'))
        self.assertEqual(cm.exception.returncode, 2)

    def test_run_requires_config(self):
        with self.assertRaises(CommandError) as cm:
            self.call('run')
        self.assertEqual(cm.exception.returncode, 1)

    def test_diagnose_needs_a_run(self):
        with self.assertRaises(CommandError) as cm:
            self.call('diagnose')
        self.assertEqual(cm.exception.returncode, 1)

    def test_diagnose_missing_run_directory(self):
        with self.assertRaises(CommandError) as cm:
            self.call('diagnose', '--run', str(self.root / 'nowhere'))
        self.assertEqual(cm.exception.returncode, 1)

    def test_ground_state_power_two_writes_its_file(self):
        out = self.root / 'gs'
        output = self.call('ground_state', '--power', '2', '--n-points', '1024', '--length', '100',
                           '--out', str(out))
        self.assertTrue((out / 'ground_state.hwb').is_file())
        self.assertFalse((out / 'profiles.json').exists())
        self.assertIn('Saved ground state', output)

    def test_ground_state_rejects_unsupported_power(self):
        with self.assertRaises(CommandError) as cm:
            self.call('ground_state', '--power', '4')
        self.assertEqual(cm.exception.returncode, 1)

    def test_verify_mass_check_at_the_late_boundary_time(self):
        output = self.call('verify', '--resolution', '2048', '--length', '200', '--checks', 'mass')
        self.assertIn('PASS ball masses', output)
        self.assertIn('t=-0.1', output)
        self.assertIn('PASS mass outside balls', output)


class DynamicsCheckTests(SimpleTestCase):

    def summary(self, **overrides):
        summary = {
            'termination': 't_stop',
            'lambda_tracking_error': 0.01,
            'alpha_error': 1e-4,
            'drifts': {'mass': 1e-12},
            'slopes': {'v_ratio': [2.0, 1.9], 'locmass': [4.1, 3.9], 'Mod': 3.8},
            'monotonicity': {'pass_fraction': 0.95},
            'ball_masses': {'max_relative_change': 0.01},
        }
        summary.update(overrides)
        return summary

    def sandwich(self, c1=0.5):
        ones = np.ones(3, dtype=bool)
        return SandwichFit(c1=c1, c2=2.0, lower_ok=ones, upper_ok=ones, c1_floor=0.05)

    def failures(self, summary, sandwich):
        return [name for name, passed, _ in Command.dynamics_results(2, summary, sandwich) if not passed]

    def test_healthy_run_passes(self):
        self.assertEqual(self.failures(self.summary(), self.sandwich()), [])

    def test_each_bubble_must_meet_the_slopes(self):
        slopes = {'v_ratio': [2.0, 1.2], 'locmass': [4.1, None], 'Mod': 3.8}
        self.assertEqual(self.failures(self.summary(slopes=slopes), self.sandwich()),
                         ['K=2 v/lambda slope', 'K=2 localized mass slope'])

    def test_sandwich_floor_and_ball_masses(self):
        summary = self.summary(ball_masses={'max_relative_change': 0.05})
        self.assertEqual(self.failures(summary, self.sandwich(c1=0.01)),
                         ['K=2 energy sandwich', 'K=2 ball masses'])


class ProjectSettingsTests(SimpleTestCase):

    def test_no_database_or_auth(self):
        self.assertEqual(connections.settings['default']['ENGINE'], 'django.db.backends.dummy')
        self.assertNotIn('django.contrib.auth', settings.INSTALLED_APPS)
        self.assertNotIn('django.contrib.contenttypes', settings.INSTALLED_APPS)
