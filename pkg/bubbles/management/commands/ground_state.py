from pathlib import Path

from django.conf import settings

from bubbles.caching import cached_ground_state, cached_profile_chain
from bubbles.checkpoints import save_ground_state, save_profiles
from bubbles.ground_state import SUPPORTED_POWERS, pohozaev_defect
from bubbles.spectral import Grid1D

from ._base import HalfwaveCommand


class Command(HalfwaveCommand):
    help = 'Solve the ground state and the correction-profile chain, and save both'

    def add_arguments(self, parser):
        parser.add_argument(
            '--out',
            default=str(Path(settings.HALFWAVE['OUTPUT_DIR']) / 'ground_state'),
            help='Directory for ground_state.hwb, profile_*.hwb and profiles.json'
        )
        parser.add_argument(
            '--n-points',
            type=int,
            default=settings.HALFWAVE['DEFAULT_N_POINTS'],
            help='Grid size (power of two)'
        )
        parser.add_argument(
            '--length',
            type=float,
            default=settings.HALFWAVE['DEFAULT_LENGTH'],
            help='Period of the box'
        )
        parser.add_argument(
            '--power',
            type=int,
            choices=SUPPORTED_POWERS,
            default=3,
            help='Nonlinearity power: 3 for the half-wave ground state, 2 for Benjamin-Ono'
        )
        parser.add_argument(
            '--tol',
            type=float,
            default=settings.HALFWAVE['GROUND_STATE_TOL'],
            help='Residual tolerance of the ground-state solve'
        )
        parser.add_argument(
            '--refresh',
            action='store_true',
            help='Re-solve even when a cached solution exists'
        )

    def run(self, **options):
        grid = Grid1D(options['n_points'], options['length'])
        out = Path(options['out'])

        gs = cached_ground_state(grid, power=options['power'], tol=options['tol'], refresh=options['refresh'])
        save_ground_state(gs, out)
        self.say(f'Ground state: mass {gs.mass:.12g}, residual {gs.residual_l2:.2e}, '
                 f'{gs.iterations} iterations')
        if gs.decay_fit is not None:
            self.say(f'  - decay exponent {gs.decay_fit.exponent:.4f} on {gs.decay_fit.window}')

        if options['power'] != 3:
            self.say(self.style.SUCCESS(f'Saved ground state to {out}'))
            return

        energy, defect = pohozaev_defect(gs)
        self.say(f'  - energy {energy:.3e}, Pohozaev defect {defect:.3e}')

        profiles = cached_profile_chain(gs)
        save_profiles(profiles, out)
        self.say(f'Profile chain: e1={profiles.e1:.8f}, p1={profiles.p1:.8f}')
        for name, residual in profiles.solve_residuals.items():
            self.say(f'  - {name}: residual {residual:.2e}, '
                     f'kernel overlap {profiles.compatibility_defects[name]:.1e}')
        self.say(self.style.SUCCESS(f'Saved ground state and {len(profiles.solve_residuals)} profiles to {out}'))
