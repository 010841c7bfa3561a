from django.core.management.base import CommandError

from bubbles.runner import rediagnose, run_directory
from bubbles.serializers import parse_config

from ._base import HalfwaveCommand


class Command(HalfwaveCommand):
    help = 'Recompute trend diagnostics for a stored run, optionally sweeping the virial radius A'

    def add_arguments(self, parser):
        parser.add_argument('--run', help='Run directory (holds config.json and trajectory.csv)')
        parser.add_argument('--config', help='Locate the run directory from this configuration')
        parser.add_argument('--out', help='Output root used by the run')
        parser.add_argument(
            '--A',
            type=float,
            nargs='+',
            default=[],
            help='Virial radii to evaluate on the stored checkpoints, e.g. 25 50 100'
        )

    def run(self, **options):
        if options['run']:
            directory = options['run']
        elif options['config']:
            directory = run_directory(parse_config(options['config']), options['out'])
        else:
            raise CommandError('one of --run or --config is required', returncode=1)

        report = rediagnose(directory, options['A'])

        self.say(f'Run {report["config_hash"]}: {report["samples"]} samples')
        if 'monotonicity' in report:
            self.say(f'  - monotonicity pass fraction (A={report["monotonicity"]["A"]:g}): '
                     f'{report["monotonicity"]["pass_fraction"]:.3f}')
            self.say(f'  - energy sandwich holds: {report["sandwich"]["holds"]}')
        for name, fraction in report['corridor_pass_fractions'].items():
            self.say(f'  - corridor {name}: {fraction:.3f}')
        for A, entry in report.get('A_sweep', {}).items():
            fraction = entry.get('pass_fraction')
            detail = f'{fraction:.3f}' if fraction is not None else f'{entry["checkpoints"]} checkpoints'
            self.say(f'  - A={A}: {detail}')
        self.say(self.style.SUCCESS(f'Diagnostics written to {directory}/diagnostics.json'))
