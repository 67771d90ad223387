from config.core.commands import PipelineCommand
from config.core.serializer_utils import render_json
from training.filters import TrainingRunFilter
from training.models import TrainingRun
from training.serializers import TrainingRunSerializer


class Command(PipelineCommand):
    help = 'List recorded training runs, filtered like the run registry.'

    def add_pipeline_arguments(self, parser):
        for name, filter_ in TrainingRunFilter.base_filters.items():
            parser.add_argument(f"--{name.replace('_', '-')}", dest=f'filter_{name}', help=str(filter_.label or name))
        parser.add_argument('--json', action='store_true', help='Print the runs (with evaluations) as JSON.')

    def run(self, **options):
        data = {
            key.removeprefix('filter_'): value
            for key, value in options.items()
            if key.startswith('filter_') and value is not None
        }
        filterset = TrainingRunFilter(data, queryset=TrainingRun.objects.select_related('dataset'))
        if not filterset.is_valid():
            raise self.usage_error('; '.join(f'{field}: {" ".join(errors)}' for field, errors in filterset.errors.items()))
        runs = filterset.qs
        if options['json']:
            self.stdout.write(render_json(TrainingRunSerializer(runs, many=True).data).decode())
            return
        if not runs:
            self.stdout.write(self.style.WARNING('No runs match.'))
            return
        for run in runs:
            best = '-' if run.best_hr is None else f'HR {run.best_hr:.2f} NDCG {run.best_ndcg:.2f} @ epoch {run.best_epoch}'
            self.stdout.write(f'{run.run_key:<24} {run.ablation:<12} {run.status:<9} target {run.target_domain}  {best}')
