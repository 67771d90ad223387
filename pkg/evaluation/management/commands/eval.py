import json
from pathlib import Path

from config.core.commands import PipelineCommand
from config.core.exceptions import DataFormatError
from config.core.serializer_utils import write_json
from evaluation.services.evaluator import EvalReport, NetworkScorer, evaluate_domain
from evaluation.services.export import dump_attention, export_representations
from evaluation.services.sparsity import sparsity_report
from evaluation.services.tables import report_table, sparsity_table
from interactions.services.storage import read_dataset
from interactions.services.types import DOMAINS, Domain
from recsys.encoders import build_graphs
from training.services.checkpoints import restore_network
from training.services.config_loader import load_training_config
from training.services.runs import CONFIG, MANIFEST


class Command(PipelineCommand):
    help = 'Evaluate the best checkpoint of a run: per-domain and sparsity-bucket HR/NDCG.'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--run', required=True, help='Run directory written by train or ablate.')
        parser.add_argument('--data', required=True, help='Prepared dataset directory.')
        parser.add_argument('--checkpoint', default='best', choices=['best', 'last'])
        parser.add_argument('--export-reps', metavar='PATH', help='Write sampled user representations here.')
        parser.add_argument('--sample-size', type=int, default=50, help='Users sampled per exported group.')
        parser.add_argument('--include-specific-a', action='store_true', help='Also export h_s of domain A.')
        parser.add_argument('--dump-attention', metavar='PATH', help='Write fusion weights of every held-out positive.')

    def _networks(self, run_dir: Path, dataset, config, checkpoint: str) -> dict:
        """Per evaluated domain, the network that should score it."""
        if not config.retrain_per_direction:
            network = restore_network(dataset, config, run_dir / 'checkpoints' / checkpoint)
            return {domain: network for domain in DOMAINS}
        return {
            domain: restore_network(dataset, config.replace(target_domain=domain.value),
                                    run_dir / 'checkpoints' / f'direction_{domain.value}' / checkpoint)
            for domain in DOMAINS
        }

    def run(self, **options):
        run_dir = Path(options['run'])
        if not (run_dir / CONFIG).exists():
            raise DataFormatError('not a run directory (config.json missing)', path=run_dir)
        config = load_training_config(run_dir / CONFIG)
        dataset, candidates, manifest = read_dataset(options['data'])
        run_manifest = json.loads((run_dir / MANIFEST).read_text()) if (run_dir / MANIFEST).exists() else {}
        if run_manifest.get('dataset_fingerprint') not in (None, manifest['fingerprint']):
            self.stdout.write(self.style.WARNING(
                f"Run was trained on dataset {run_manifest['dataset_fingerprint'][:12]}, "
                f"evaluating on {manifest['fingerprint'][:12]}"
            ))

        graphs = build_graphs(dataset)
        networks = self._networks(run_dir, dataset, config, options['checkpoint'])
        scorers = {domain: NetworkScorer(networks[domain], graphs, attention=config.flags.attention) for domain in DOMAINS}
        report = EvalReport(
            k=config.top_k,
            domains={
                domain: evaluate_domain(scorers[domain], domain, candidates.get(domain), config.top_k,
                                        config.eval_batch_users, config.num_negatives)
                for domain in DOMAINS
            },
            config_hash=config.hash,
            seed=config.seed,
        )
        report.sparsity = sparsity_report(report, dataset)
        out = Path(options['out']) if options['out'] else run_dir
        write_json(out / 'eval_report.json', report.to_dict())

        self.stdout.write(report_table(report))
        self.stdout.write('')
        self.stdout.write(sparsity_table(report.sparsity))

        if options['export_reps']:
            seed = options['seed'] if options['seed'] is not None else config.seed
            target = networks[Domain(config.target_domain)]
            path = export_representations(target, graphs, options['sample_size'], seed, options['export_reps'],
                                          include_specific_a=options['include_specific_a'])
            self.stdout.write(self.style.SUCCESS(f'Representations written to {path}'))
        if options['dump_attention']:
            path = dump_attention(scorers, candidates, options['dump_attention'],
                                  config.eval_batch_users, config.num_negatives)
            self.stdout.write(self.style.SUCCESS(f'Attention weights written to {path}'))
        self.stdout.write(self.style.SUCCESS(f"Report written to {out / 'eval_report.json'}"))
