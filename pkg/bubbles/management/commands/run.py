from bubbles.runner import run_experiment, run_schedule
from bubbles.serializers import parse_config

from ._base import HalfwaveCommand


class Command(HalfwaveCommand):
    help = 'Evolve boundary data from a run configuration and record the tracked trajectory'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to a JSON run configuration')
        parser.add_argument('--out', help='Output root (default: output_dir from the config)')
        parser.add_argument(
            '--schedule',
            type=float,
            nargs='+',
            help='Run once per t_start value, concurrently, and tabulate the tracking error'
        )
        parser.add_argument('--workers', type=int, help='Thread count for --schedule')

    def run(self, **options):
        config = parse_config(options['config'])

        if options['schedule']:
            summary = self.run_schedule(config, options)
            failed = [entry for entry in summary['runs'] if entry['termination'].startswith('error')]
            if failed:
                self.say(self.style.WARNING(f'{len(failed)} of {len(summary["runs"])} schedule runs failed'))
            return

        artifacts = run_experiment(config, options['out'])
        summary = artifacts.summary
        self.say(f'Run {summary["config_hash"]}: {summary["samples"]} samples, '
                 f'termination {summary["termination"]}')
        if 'lambda_tracking_error' in summary:
            self.say(f'  - lambda tracking error {summary["lambda_tracking_error"]:.3e}')
        self.say(f'  - mass drift {summary["drifts"]["mass"]:.2e}')
        self.say(self.style.SUCCESS(f'Artifacts written to {artifacts.directory}'))

    def run_schedule(self, config, options):
        """Sweep t_start and report each run's lambda-tracking error"""
        self.say(f'Running {len(options["schedule"])} configurations...')
        summary = run_schedule(config, options['schedule'], options['out'], options['workers'])
        for entry in summary['runs']:
            error = entry.get('lambda_tracking_error')
            detail = f'{error:.3e}' if error is not None else entry['termination']
            self.say(f'  - t_start={entry["t_start"]:g}: {detail}')
        self.say(self.style.SUCCESS(f'Schedule summary written for {len(summary["runs"])} runs'))
        return summary
