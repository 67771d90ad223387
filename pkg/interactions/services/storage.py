"""
Reading and writing prepared dataset directories.

A prepared directory holds tab-separated row files (vocabularies, train and
test splits, candidate sets per domain) plus `manifest.json`. The manifest
fingerprint is computed over the row files only, so rerunning `prepare`
with the same inputs reproduces it.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from config.core.exceptions import DataFormatError
from config.core.hashing import files_fingerprint
from config.core.serializer_utils import write_json
from interactions.serializers import DatasetManifestSerializer
from .types import DOMAINS, CandidateSet, DomainDataset

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


def _write_table(path: Path, frame: pd.DataFrame):
    frame.to_csv(path, sep='\t', index=False, lineterminator='\n')


def _candidate_frame(candidate_sets, num_negatives) -> pd.DataFrame:
    columns = ['user', 'positive'] + [f'neg_{i}' for i in range(num_negatives)]
    rows = [(c.user_index, c.positive_item) + tuple(c.negatives) for c in candidate_sets]
    return pd.DataFrame(rows, columns=columns, dtype=np.int64) if rows else pd.DataFrame(columns=columns)


def write_dataset(dataset: DomainDataset, candidates: dict, out_dir, *, seed: int, num_negatives: int,
                  source: str, synthetic_spec: dict = None) -> dict:
    """
    Writes all row files and the manifest. Returns the validated manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        'users.tsv': pd.DataFrame({'index': np.arange(dataset.user_count), 'user_id': dataset.user_ids}),
    }
    for domain in DOMAINS:
        tag = domain.value
        files[f'items_{tag}.tsv'] = pd.DataFrame({'index': np.arange(dataset.item_count(domain)), 'item_id': dataset.item_ids[domain]})
        files[f'train_{tag}.tsv'] = pd.DataFrame(dataset.train(domain), columns=['user', 'item'])
        files[f'test_{tag}.tsv'] = pd.DataFrame(dataset.test(domain), columns=['user', 'item'])
        files[f'candidates_{tag}.tsv'] = _candidate_frame(candidates[domain], num_negatives)
    for name, frame in files.items():
        _write_table(out_dir / name, frame)

    summary = dataset.summary()
    manifest = DatasetManifestSerializer(data={
        'source': source,
        'seed': seed,
        'user_count': summary['user_count'],
        'item_counts': summary['item_counts'],
        'train_sizes': summary['train_sizes'],
        'test_sizes': summary['test_sizes'],
        'candidate_counts': {d.value: len(candidates[d]) for d in DOMAINS},
        'skipped_candidates': {d.value: len(dataset.test(d)) - len(candidates[d]) for d in DOMAINS},
        'num_negatives': num_negatives,
        'files': sorted(files),
        'fingerprint': files_fingerprint(out_dir, files),
        'synthetic_spec': synthetic_spec,
    })
    manifest.is_valid(raise_exception=True)
    write_json(out_dir / MANIFEST_NAME, manifest.validated_data)
    logger.info('Wrote dataset %s to %s', manifest.validated_data['fingerprint'][:12], out_dir)
    return dict(manifest.validated_data)


def _read_table(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise DataFormatError('prepared file is missing', path=path)
    return pd.read_csv(path, sep='\t', dtype={'user_id': str, 'item_id': str}, keep_default_na=False)


def read_manifest(data_dir) -> dict:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise DataFormatError('no manifest; run `manage.py prepare` first', path=path)
    manifest = DatasetManifestSerializer(data=json.loads(path.read_text()))
    manifest.is_valid(raise_exception=True)
    return dict(manifest.validated_data)


def read_dataset(data_dir) -> tuple[DomainDataset, dict, dict]:
    """
    Loads a prepared directory back into (dataset, candidates per domain, manifest).
    """
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    users = _read_table(data_dir / 'users.tsv')
    item_ids, train, test, candidates = {}, {}, {}, {}
    for domain in DOMAINS:
        tag = domain.value
        item_ids[domain] = _read_table(data_dir / f'items_{tag}.tsv')['item_id'].to_numpy()
        train[domain] = _read_table(data_dir / f'train_{tag}.tsv')[['user', 'item']].to_numpy(dtype=np.int64)
        test[domain] = _read_table(data_dir / f'test_{tag}.tsv')[['user', 'item']].to_numpy(dtype=np.int64)
        table = _read_table(data_dir / f'candidates_{tag}.tsv').to_numpy(dtype=np.int64)
        candidates[domain] = [
            CandidateSet(user_index=int(row[0]), domain=domain, positive_item=int(row[1]),
                         negatives=tuple(int(i) for i in row[2:]), seed=manifest['seed'])
            for row in table
        ]
    dataset = DomainDataset(
        user_count=len(users),
        item_counts=(len(item_ids[DOMAINS[0]]), len(item_ids[DOMAINS[1]])),
        train_interactions=train,
        test_interactions=test,
        user_ids=users['user_id'].to_numpy(),
        item_ids=item_ids,
    )
    return dataset, candidates, manifest
