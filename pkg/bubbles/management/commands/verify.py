import tempfile
from functools import cached_property
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import CommandError

from bubbles.caching import cached_ground_state, cached_profile_chain
from bubbles.checkpoints import checkpoint_load, checkpoint_save
from bubbles.diagnostics import energy_sandwich, mass_quantization, sandwich_floor
from bubbles.evolver import initial_state
from bubbles.exceptions import CheckpointError, HalfwaveError, UnderResolvedError
from bubbles.ground_state import decay_exponent, gn_functional, periodic_benjamin_ono
from bubbles.linearized import coercivity_rayleigh, kernel_identity_residuals, localized_coercivity_check
from bubbles.modulation import closed_form_params, decompose, integrate_param_ode
from bubbles.profiles import BubbleParams, ProfileInterpolator, boundary_data
from bubbles.runner import psi_scaling, resolution_limit, run_experiment
from bubbles.serializers import validate_config
from bubbles.spectral import (
    Grid1D,
    derivative,
    fractional_laplacian,
    inner_product,
    l2_norm,
    scaling_operator,
)

from ._base import HalfwaveCommand

CHECKS = ('operators', 'ground_state', 'benjamin_ono', 'kernel', 'psi', 'coercivity',
          'reduced_ode', 'decomposition', 'mass', 'checkpoint', 'dynamics')
DEFAULT_CHECKS = CHECKS[:-1]
OPERATOR_TOL = 1e-6
# identities exact on the line; the x^-2 tails leave about 1e-5 on a 200-periodic box
KERNEL_TOL = 1e-4
GN_AT_Q_TOL = 1e-5
COERCIVITY_MODES = 200
COERCIVITY_RTOL = 1e-2
# fine narrow box on which lambda(-0.1) = 0.0025 spans four cells
MASS_GRID = (65536, 40.0)
MASS_TIME = -0.1
DYNAMICS_LENGTH = 40.0
DYNAMICS_WINDOW = (-0.9, -0.45)
DYNAMICS_CENTERS = {1: [0.0], 2: [-5.0, 5.0]}


def _or(value, default):
    return default if value is None else value


class Command(HalfwaveCommand):
    help = 'Run the property suite and print one PASS/FAIL line per check'

    def add_arguments(self, parser):
        parser.add_argument(
            '--resolution',
            type=int,
            default=settings.HALFWAVE['DEFAULT_N_POINTS'],
            help='Grid size for the suite (default: %(default)s)'
        )
        parser.add_argument('--length', type=float, default=settings.HALFWAVE['DEFAULT_LENGTH'])
        parser.add_argument('--seed', type=int, default=0, help='Seed for the randomized checks')
        parser.add_argument(
            '--checks',
            nargs='+',
            choices=CHECKS,
            default=list(DEFAULT_CHECKS),
            help='Checks to run (default: all but the short dynamics run)'
        )

    def run(self, **options):
        self.grid = Grid1D(options['resolution'], options['length'])
        self.rng = np.random.default_rng(options['seed'])
        self.say(f'Property suite on n={self.grid.n_points}, L={self.grid.length:g}')

        results = []
        for name in options['checks']:
            try:
                results.extend(getattr(self, f'check_{name}')())
            except HalfwaveError as e:
                results.append((name, False, f'{type(e).__name__}: {e}'))

        for name, passed, detail in results:
            if passed:
                self.say(self.style.SUCCESS(f'PASS {name}: {detail}'))
            else:
                self.stdout.write(self.style.ERROR(f'FAIL {name}: {detail}'))

        failed = [name for name, passed, _ in results if not passed]
        if failed:
            raise CommandError(f'{len(failed)} of {len(results)} checks failed: {", ".join(failed)}',
                               returncode=2)
        self.say(self.style.SUCCESS(f'All {len(results)} checks passed'))

    @cached_property
    def profiles(self):
        return cached_profile_chain(cached_ground_state(self.grid))

    @cached_property
    def coercivity(self):
        return coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=2 * COERCIVITY_MODES)

    def smooth_field(self):
        x = self.grid.nodes
        coefficients = self.rng.normal(size=4) + 1j * self.rng.normal(size=4)
        centers = self.rng.uniform(-10, 10, size=4)
        widths = self.rng.uniform(1.0, 4.0, size=4)
        values = sum(c * np.exp(-((x - x0) / w) ** 2) for c, x0, w in zip(coefficients, centers, widths))
        return self.grid.field(values)

    def check_operators(self):
        """Self-adjointness, semigroup, Parseval and [D, Lambda] = D"""
        f, g = self.smooth_field(), self.smooth_field()
        D = lambda h, s=1.0: fractional_laplacian(h, s)
        adjoint = abs(inner_product(D(f), g) - inner_product(f, D(g))) / (l2_norm(D(f)) * l2_norm(g))
        semigroup = l2_norm(D(D(f, 0.3), 0.4) - D(f, 0.7)) / l2_norm(D(f, 0.7))
        spectrum = np.fft.fft(f.values)
        parseval = abs(l2_norm(f) ** 2 - self.grid.length / self.grid.n_points ** 2 * np.sum(np.abs(spectrum) ** 2))
        parseval /= l2_norm(f) ** 2
        # weak form against a localized g; vanishing low moments of h keep the
        # periodic images of D h out of the identity
        h = derivative(self.grid.from_function(lambda x: np.exp(-x ** 2 / 4)), 4)
        g = self.grid.from_function(lambda x: np.exp(-(x - 1) ** 2 / 2))
        pairing = inner_product(D(h), g)
        commutator = inner_product(D(scaling_operator(h)), g) + inner_product(D(h), scaling_operator(g)) - pairing
        commutator_defect = abs(commutator) / abs(pairing)
        return [
            ('self-adjointness', adjoint <= OPERATOR_TOL, f'{adjoint:.2e}'),
            ('semigroup', semigroup <= OPERATOR_TOL, f'{semigroup:.2e}'),
            ('parseval', parseval <= OPERATOR_TOL, f'{parseval:.2e}'),
            ('[D, Lambda] = D', commutator_defect <= OPERATOR_TOL, f'{commutator_defect:.2e}'),
        ]

    def check_ground_state(self):
        gs = cached_ground_state(self.grid)
        upper = min(60.0, 0.2 * self.grid.length)
        fit = decay_exponent(gs, (20.0, upper))
        j_q = gn_functional(gs.q, gs)
        random_j = [gn_functional(self.smooth_field(), gs) for _ in range(100)]
        return [
            ('ground state residual', gs.residual_l2 <= 1e-10, f'{gs.residual_l2:.2e}'),
            ('decay exponent', abs(fit.exponent - 2.0) <= 0.1, f'{fit.exponent:.4f} on [20, {upper:g}]'),
            ('GN functional at Q', abs(j_q - 1.0) <= GN_AT_Q_TOL, f'{j_q:.10f}'),
            ('GN functional below 1', max(random_j) < 1.0, f'max {max(random_j):.6f} over 100 fields'),
        ]

    def check_benjamin_ono(self):
        gs = cached_ground_state(self.grid, power=2)
        oracle = periodic_benjamin_ono(self.grid)
        periodic = float(np.max(np.abs(gs.values - oracle.values.real)))
        x = self.grid.nodes
        window = np.abs(x) <= min(50.0, 0.25 * self.grid.length)
        line = float(np.max(np.abs(gs.values[window] - 2.0 / (1.0 + x[window] ** 2))))
        k = 2 * np.pi / self.grid.length
        return [
            ('Benjamin-Ono periodic oracle', periodic <= 1e-8, f'sup error {periodic:.2e}'),
            ('Benjamin-Ono line soliton', line <= 10 * k * k, f'sup error {line:.2e} (torus scale {k * k:.1e})'),
        ]

    def check_kernel(self):
        profiles = self.profiles
        results = [(f'kernel {name}', value <= KERNEL_TOL, f'{value:.2e}')
                   for name, value in kernel_identity_residuals(profiles).items()]
        results.append(('e1 > 0', profiles.e1 > 0, f'{profiles.e1:.6f}'))
        results.append(('p1 > 0', profiles.p1 > 0, f'{profiles.p1:.6f}'))
        return results

    def check_psi(self):
        result = psi_scaling(self.profiles)
        b = result.b_values
        scaled = result.weighted_sups / (b ** 4 + b ** 4)
        spread = float(np.max(scaled) / np.min(scaled))
        return [
            ('Psi scaling slope', abs(result.slope - 4.0) <= 0.3, f'{result.slope:.3f}'),
            ('Psi weighted sup', spread <= 10.0, f'<x>^2 |Psi| / (b^4 + v^2) spread {spread:.2f}'),
        ]

    def check_coercivity(self):
        coarse = coercivity_rayleigh(self.profiles.gs, self.profiles, n_probe=COERCIVITY_MODES)
        fine = self.coercivity
        localized = localized_coercivity_check(self.profiles.gs, self.profiles, A=50.0, a=0.5)
        stable = abs(fine - coarse) <= COERCIVITY_RTOL * abs(fine)
        return [
            ('coercivity', fine > 0 and stable,
             f'{coarse:.4f} ({COERCIVITY_MODES} modes), {fine:.4f} ({2 * COERCIVITY_MODES} modes)'),
            ('localized coercivity A=50', localized > 0, f'{localized:.4f}'),
        ]

    def check_reduced_ode(self):
        centers, thetas = [-5.0, 5.0], [0.0, 1.0]
        initial = closed_form_params(1.0, centers, thetas, -0.4)
        series = integrate_param_ode(initial, -0.4, -0.1, 1e-3)
        worst = 0.0
        for i, t in enumerate(series.times):
            exact = np.array([p.as_tuple() for p in closed_form_params(1.0, centers, thetas, t)])
            scale = np.maximum(np.abs(exact), 1e-12)
            worst = max(worst, float(np.max(np.abs(series.values[i] - exact) / scale)))
        return [('reduced system vs closed form', worst <= 1e-8, f'{worst:.2e}')]

    def check_decomposition(self):
        profiles = self.profiles
        interpolator = ProfileInterpolator(profiles)
        exact = BubbleParams(lam=1.0, b=0.04, v=0.0016, alpha=0.3, gamma=0.2)
        u = interpolator.render(self.grid, exact)
        guess = BubbleParams(lam=1.01, b=0.038, v=0.0018, alpha=0.31, gamma=0.19)
        result = decompose(u, [guess], profiles, tol=1e-12, interpolator=interpolator)
        error = float(np.max(np.abs(np.array(result.params[0].as_tuple()) - np.array(exact.as_tuple()))))
        remainder = l2_norm(result.remainder)
        return [
            ('decomposition recovers parameters', error <= 1e-9, f'{error:.2e}'),
            ('decomposition remainder', remainder <= 1e-9, f'{remainder:.2e}'),
        ]

    def check_mass(self):
        profiles = self.profiles
        grid = Grid1D(*MASS_GRID)
        if MASS_TIME > resolution_limit(grid, [1.0]):
            raise UnderResolvedError(f'lambda({MASS_TIME}) is below the resolution of n={grid.n_points}')
        centers = DYNAMICS_CENTERS[2]
        u, _ = boundary_data(grid, 2, 1.0, centers, [0.0, 0.0], MASS_TIME, profiles)
        quantized = mass_quantization(u, centers, 1.0)
        deviation = float(np.max(np.abs(quantized.ball_masses / profiles.gs.mass - 1.0)))
        outside = quantized.outside / profiles.gs.mass
        return [
            ('ball masses', deviation <= 0.02, f'{deviation:.2%} from |Q|^2 at t={MASS_TIME:g}'),
            ('mass outside balls', outside <= 0.01, f'{outside:.2%} of |Q|^2'),
        ]

    def check_checkpoint(self):
        field = self.smooth_field()
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'state.hwb'
            checkpoint_save(initial_state(field, -0.25), path)
            loaded = checkpoint_load(path, self.grid)
            exact = loaded.t == -0.25 and np.array_equal(loaded.u.values, field.values)
            path.write_bytes(path.read_bytes()[:-8])
            try:
                checkpoint_load(path, self.grid)
                truncation = False
            except CheckpointError:
                truncation = True
        return [
            ('checkpoint round trip', exact, 'bit-identical' if exact else 'values differ'),
            ('checkpoint truncation', truncation, 'rejected' if truncation else 'accepted a truncated file'),
        ]

    def dynamics_config(self, K, n_points):
        t_start, t_stop = DYNAMICS_WINDOW
        limit = resolution_limit(Grid1D(n_points, DYNAMICS_LENGTH), [1.0])
        return validate_config({
            'K': K, 'omega': 1.0, 'centers': DYNAMICS_CENTERS[K], 'thetas': [0.0] * K,
            't_start': t_start, 't_stop': min(t_stop, 1.05 * limit),
            'grid': {'n_points': n_points, 'length': DYNAMICS_LENGTH},
            'observer_stride': 1, 'checkpoint_stride': 0,
            'tolerances': {'compatibility': 1e-3},
        }, source=f'dynamics check K={K}')

    def dynamics_run(self, K, n_points):
        config = self.dynamics_config(K, n_points)
        with tempfile.TemporaryDirectory() as directory:
            artifacts = run_experiment(config, directory)
        record = artifacts.record
        sandwich = energy_sandwich(record.times, record.column('I'), record.column('X'), config['delta'],
                                   c1_floor=sandwich_floor(self.coercivity))
        return artifacts.summary, sandwich

    def check_dynamics(self):
        """K=1 and K=2 runs on a narrow torus where the window is resolvable"""
        results = []
        sandwiches = {}
        for K in (1, 2):
            summary, sandwich = self.dynamics_run(K, self.grid.n_points)
            sandwiches[K] = sandwich
            results.extend(self.dynamics_results(K, summary, sandwich))
        _, refined = self.dynamics_run(1, 2 * self.grid.n_points)
        stable = sandwiches[1].agrees_with(refined)
        results.append(('K=1 sandwich across resolutions', stable,
                        f'C1 {sandwiches[1].c1:.3g} / {refined.c1:.3g}, C2 {sandwiches[1].c2:.3g} / {refined.c2:.3g}'))
        return results

    @staticmethod
    def dynamics_results(K, summary, sandwich):
        slopes = summary.get('slopes', {})
        nan, inf = float('nan'), float('inf')

        def worst(name):
            values = slopes.get(name) or [None]
            if any(v is None for v in values):
                return nan
            return min(values)

        v_ratio, locmass = worst('v_ratio'), worst('locmass')
        mod = _or(slopes.get('Mod'), nan)
        tracking = _or(summary.get('lambda_tracking_error'), inf)
        alpha = _or(summary.get('alpha_error'), inf)
        drift = _or(summary['drifts']['mass'], inf)
        pass_fraction = summary.get('monotonicity', {}).get('pass_fraction') or 0.0
        results = [
            (f'K={K} run termination', summary['termination'] == 't_stop', summary['termination']),
            (f'K={K} lambda tracking', tracking <= 0.05, f'{tracking:.2e}'),
            (f'K={K} alpha', alpha <= 1e-2, f'{alpha:.2e}'),
            (f'K={K} v/lambda slope', v_ratio >= 1.5, f'{v_ratio:.3f}'),
            (f'K={K} Mod slope', mod >= 3.5, f'{mod:.3f}'),
            (f'K={K} localized mass slope', locmass >= 3.5, f'{locmass:.3f}'),
            (f'K={K} mass drift', drift <= 1e-8, f'{drift:.2e}'),
            (f'K={K} energy sandwich', sandwich.holds,
             f'C1={sandwich.c1:.3g} (floor {sandwich.c1_floor:.3g}), C2={sandwich.c2:.3g}'),
            (f'K={K} monotonicity', pass_fraction >= 0.9, f'{pass_fraction:.2f} pass'),
        ]
        if K > 1:
            change = _or(summary.get('ball_masses', {}).get('max_relative_change'), inf)
            results.append((f'K={K} ball masses', change <= 0.03, f'{change:.2%} max change'))
        return results
