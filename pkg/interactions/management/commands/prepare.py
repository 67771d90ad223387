import logging
from dataclasses import asdict

from django.conf import settings

from config.core.commands import PipelineCommand
from interactions.services.loaders import DATASET_PRESETS, check_preset, load_interactions
from interactions.services.registry import register_dataset
from interactions.services.sampling import build_candidate_sets
from interactions.services.storage import write_dataset
from interactions.services.synthesis import synthesize_dataset
from interactions.services.types import DOMAINS, SyntheticSpec

logger = logging.getLogger(__name__)

DELIMITER_ALIASES = {'tab': '\t', '\\t': '\t', 'comma': ',', 'space': ' '}


class Command(PipelineCommand):
    help = 'Ingest interaction files or synthesize a dataset, then write splits, candidate sets and a manifest.'

    def add_pipeline_arguments(self, parser):
        source = parser.add_argument_group('source')
        source.add_argument('--input', nargs='+', metavar='PATH',
                            help='One file with a domain column, or two files (domain A, domain B).')
        source.add_argument('--test-input', nargs='+', metavar='PATH',
                            help='Explicit test split with the same layout as --input.')
        source.add_argument('--delimiter', default='tab', help="Column delimiter ('tab', 'comma' or a literal).")
        source.add_argument('--expect-preset', choices=sorted(DATASET_PRESETS),
                            help='Warn when the ingested counts differ from a published scenario.')

        synthetic = parser.add_argument_group('synthetic')
        defaults = SyntheticSpec()
        synthetic.add_argument('--synthetic', action='store_true', help='Generate a synthetic dataset.')
        synthetic.add_argument('--users', type=int, default=defaults.user_count)
        synthetic.add_argument('--items-a', type=int, default=defaults.item_counts[0])
        synthetic.add_argument('--items-b', type=int, default=defaults.item_counts[1])
        synthetic.add_argument('--latent-dim', type=int, default=defaults.latent_dim)
        synthetic.add_argument('--shared', type=float, default=defaults.shared_strength)
        synthetic.add_argument('--exclusive', type=float, default=defaults.exclusive_strength)
        synthetic.add_argument('--noise', type=float, default=defaults.noise)
        synthetic.add_argument('--interactions-per-user', type=int, default=defaults.interactions_per_user)

        parser.add_argument('--num-negatives', type=int, default=999, help='Evaluation negatives per test positive.')

    def run(self, **options):
        if options['input'] and options['synthetic']:
            raise self.usage_error('--input and --synthetic are mutually exclusive.')
        if not options['input'] and not options['synthetic']:
            raise self.usage_error('Give either --input PATH [PATH] or --synthetic.')
        if options['test_input'] and not options['input']:
            raise self.usage_error('--test-input requires --input.')
        if options['num_negatives'] < 1:
            raise self.usage_error('--num-negatives must be at least 1.')

        seed = options['seed'] if options['seed'] is not None else 0
        out = options['out'] or settings.DATA_DIR
        spec = None
        if options['synthetic']:
            spec = SyntheticSpec(
                user_count=options['users'],
                item_counts=(options['items_a'], options['items_b']),
                latent_dim=options['latent_dim'],
                shared_strength=options['shared'],
                exclusive_strength=options['exclusive'],
                noise=options['noise'],
                interactions_per_user=options['interactions_per_user'],
                seed=seed,
            )
            dataset = synthesize_dataset(spec)
        else:
            delimiter = DELIMITER_ALIASES.get(options['delimiter'], options['delimiter'])
            dataset = load_interactions(options['input'], delimiter=delimiter, test_paths=options['test_input'])
            if options['expect_preset']:
                for mismatch in check_preset(dataset, options['expect_preset']):
                    self.stdout.write(self.style.WARNING(f'{options["expect_preset"]}: {mismatch}'))

        candidates = {
            domain: build_candidate_sets(dataset, domain, seed=seed, num_negatives=options['num_negatives'])
            for domain in DOMAINS
        }
        manifest = write_dataset(
            dataset, candidates, out,
            seed=seed,
            num_negatives=options['num_negatives'],
            source='synthetic' if spec else 'files',
            synthetic_spec=asdict(spec) if spec else None,
        )
        register_dataset(manifest, out)
        self.stdout.write(self.style.SUCCESS(
            f"Prepared {manifest['user_count']} users, train {manifest['train_sizes']}, "
            f"test {manifest['test_sizes']} -> {out} (fingerprint {manifest['fingerprint'][:12]})"
        ))
