from pathlib import Path

from django.conf import settings

from bubbles.caching import cached_ground_state, cached_profile_chain
from bubbles.runner import PSI_B_VALUES, psi_scaling, write_psi_scaling
from bubbles.spectral import Grid1D

from ._base import HalfwaveCommand

EXPECTED_SLOPE = 4.0
SLOPE_TOLERANCE = 0.3


class Command(HalfwaveCommand):
    help = 'Measure how the modified-profile residual scales with b along v = b^2'

    def add_arguments(self, parser):
        parser.add_argument('--out', default='.', help='Directory for psi_scaling.csv')
        parser.add_argument('--n-points', type=int, default=settings.HALFWAVE['DEFAULT_N_POINTS'])
        parser.add_argument('--length', type=float, default=settings.HALFWAVE['DEFAULT_LENGTH'])
        parser.add_argument(
            '--b',
            type=float,
            nargs='+',
            default=list(PSI_B_VALUES),
            help='Values of b to sweep (default: 0.02 0.04 0.08)'
        )

    def run(self, **options):
        grid = Grid1D(options['n_points'], options['length'])
        profiles = cached_profile_chain(cached_ground_state(grid))

        result = psi_scaling(profiles, options['b'])
        path = write_psi_scaling(Path(options['out']) / 'psi_scaling.csv', result)

        for b, l2, sup in zip(result.b_values, result.l2_norms, result.weighted_sups):
            self.say(f'  b={b:g}: |Psi|_L2={l2:.4e}, weighted sup={sup:.4e}')
        message = f'Psi slope {result.slope:.3f} written to {path}'
        if abs(result.slope - EXPECTED_SLOPE) <= SLOPE_TOLERANCE:
            self.say(self.style.SUCCESS(message))
        else:
            self.say(self.style.WARNING(f'{message} (expected {EXPECTED_SLOPE} +/- {SLOPE_TOLERANCE})'))
