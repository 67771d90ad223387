import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from .exceptions import DataFormatError, PipelineError
from .serializer_utils import flatten_errors

APP_LOGGERS = ('interactions', 'recsys', 'training', 'evaluation', 'config')


class PipelineCommand(BaseCommand):
    """
    Base class for the pipeline subcommands.

    Adds the global flags (--config, --seed, --out, --quiet) and maps
    exceptions to exit codes:
    - 1 for validation problems (bad config fields, malformed input, flag conflicts)
    - 2 for runtime, numerical and I/O failures
    Subclasses implement `add_pipeline_arguments` and `run`.
    """
    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file with TrainingConfig fields.')
        parser.add_argument('--seed', type=int, help='Seed for every random generator of the command.')
        parser.add_argument('--out', help='Output directory.')
        parser.add_argument('--quiet', action='store_true', help='Only log warnings and errors.')
        self.add_pipeline_arguments(parser)

    def add_pipeline_arguments(self, parser):
        pass

    def usage_error(self, message):
        return CommandError(message, returncode=1)

    def handle(self, *args, **options):
        if options.get('quiet'):
            for name in APP_LOGGERS:
                logging.getLogger(name).setLevel(logging.WARNING)
        try:
            self.run(**options)
        except serializers.ValidationError as exc:
            raise CommandError(flatten_errors(exc.detail), returncode=1) from exc
        except DataFormatError as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except PipelineError as exc:
            raise CommandError(str(exc), returncode=2) from exc
        except OSError as exc:
            raise CommandError(f'I/O error: {exc}', returncode=2) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of PipelineCommand must provide a run() method')
