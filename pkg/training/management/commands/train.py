import logging

from django.conf import settings

from config.core.commands import PipelineCommand
from evaluation.services.tables import report_table
from interactions.services.storage import read_dataset
from training.services.config_loader import add_config_arguments, config_overrides, load_training_config
from training.services.runs import RunRecorder
from training.services.trainer import fit

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Train the cross-domain model on a prepared dataset and record the run.'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--data', required=True, help='Prepared dataset directory.')
        add_config_arguments(parser)

    def run(self, **options):
        config = load_training_config(options['config'], config_overrides(options))
        dataset, candidates, manifest = read_dataset(options['data'])
        runs_dir = options['out'] or settings.RUNS_DIR
        recorder = RunRecorder.open(runs_dir, config, command='train', dataset_manifest=manifest)
        try:
            result = fit(dataset, candidates, config, recorder=recorder)
        except Exception as exc:
            recorder.fail(exc)
            raise
        recorder.finish(result)

        self.stdout.write(report_table(result.best_report))
        self.stdout.write(self.style.SUCCESS(
            f'Run {config.run_key} finished (best epoch {result.best_epoch}) -> {recorder.run_dir}'
        ))
