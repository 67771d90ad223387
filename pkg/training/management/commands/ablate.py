from django.conf import settings

from config.core.commands import PipelineCommand
from evaluation.services.tables import ablation_table
from interactions.services.storage import read_dataset
from training.config import Ablation
from training.services.config_loader import add_config_arguments, config_overrides, load_training_config
from training.services.sweeps import VARIANT_ORDER, parse_grid, run_sweep, summarize


def _int_list(text: str) -> list:
    return [int(value) for value in text.split(',') if value.strip()]


class Command(PipelineCommand):
    help = 'Train every ablation variant over shared seeds and print a comparison table.'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--data', required=True, help='Prepared dataset directory.')
        parser.add_argument('--seeds', type=_int_list, default=[1, 2, 3, 4, 5], help='Comma-separated seeds.')
        parser.add_argument('--variants', nargs='+', choices=list(Ablation.values),
                            default=[variant.value for variant in VARIANT_ORDER])
        parser.add_argument('--grid', action='append', metavar='FIELD=v1,v2',
                            help='Sweep a config field over a list of values (repeatable).')
        parser.add_argument('--summary-out', help='Also write the summary table as TSV.')
        add_config_arguments(parser)

    def run(self, **options):
        try:
            grid = parse_grid(options['grid'])
        except ValueError as exc:
            raise self.usage_error(str(exc)) from exc
        if not options['seeds']:
            raise self.usage_error('--seeds needs at least one seed.')
        base = load_training_config(options['config'], config_overrides(options))
        dataset, candidates, manifest = read_dataset(options['data'])

        results = run_sweep(
            dataset, candidates, base,
            variants=options['variants'],
            seeds=options['seeds'],
            grid=grid,
            runs_dir=options['out'] or settings.RUNS_DIR,
            dataset_manifest=manifest,
        )
        summary = summarize(results)
        if options['summary_out']:
            summary.to_csv(options['summary_out'], sep='\t', index=False, lineterminator='\n')
        self.stdout.write(ablation_table(summary, k=base.top_k))
        self.stdout.write(self.style.SUCCESS(
            f"{len(results)} runs over seeds {options['seeds']}"
        ))
