import logging

from django.core.management.base import BaseCommand, CommandError

from bubbles.exceptions import NumericalFailure, ValidationFailure


class HalfwaveCommand(BaseCommand):
    """Shared --quiet flag and exit codes: 1 for validation and usage errors, 2 for numerical failures."""

    quiet = False

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.add_argument(
            '--quiet',
            action='store_true',
            help='Only report warnings and errors'
        )
        # usage errors become CommandError (exit 1) instead of argparse's exit 2
        parser.called_from_command_line = False
        return parser

    def handle(self, *args, **options):
        self.quiet = options.get('quiet', False)
        logger = logging.getLogger('bubbles')
        previous = logger.level
        if self.quiet:
            logger.setLevel(logging.WARNING)
        try:
            return self.run(**options)
        except ValidationFailure as e:
            raise CommandError(str(e), returncode=1)
        except NumericalFailure as e:
            raise CommandError(str(e), returncode=2)
        finally:
            logger.setLevel(previous)

    def run(self, **options):
        raise NotImplementedError

    def say(self, message, style=None):
        if not self.quiet:
            self.stdout.write(style(message) if style else message)
