from pathlib import Path

from interactions.models import PreparedDataset


def register_dataset(manifest: dict, path) -> PreparedDataset:
    """
    Upserts the registry row of a prepared directory, keyed by fingerprint,
    so rerunning `prepare` with the same inputs does not duplicate it.
    """
    counts = {key: manifest[key] for key in ('item_counts', 'train_sizes', 'test_sizes')}
    dataset, _ = PreparedDataset.objects.update_or_create(
        fingerprint=manifest['fingerprint'],
        defaults={
            'path': str(Path(path).resolve()),
            'source': manifest['source'],
            'seed': manifest['seed'],
            'user_count': manifest['user_count'],
            'item_count_a': counts['item_counts']['A'],
            'item_count_b': counts['item_counts']['B'],
            'train_size_a': counts['train_sizes']['A'],
            'train_size_b': counts['train_sizes']['B'],
            'test_size_a': counts['test_sizes']['A'],
            'test_size_b': counts['test_sizes']['B'],
            'num_negatives': manifest['num_negatives'],
        },
    )
    return dataset
