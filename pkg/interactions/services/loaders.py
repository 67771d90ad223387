"""
Ingestion of delimited interaction logs into a DomainDataset.

Input is either one file per domain (columns user_id, item_id and an optional
timestamp) or a single file with an extra `domain` column holding two tags.
Ids are re-indexed to contiguous integers in sorted id order, duplicate
(user, item) rows are dropped and, unless explicit test files are given, the
last interaction of every user in every domain is held out.
"""
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from config.core.exceptions import DataFormatError
from .types import DOMAINS, Domain, DomainDataset

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ('user_id', 'item_id')
DOMAIN_COLUMN = 'domain'
TIMESTAMP_COLUMN = 'timestamp'

# Published statistics of the four Amazon scenarios, domain A first.
DATASET_PRESETS = {
    'elec_phone': {'user_count': 3325, 'item_counts': (17709, 38706), 'train_sizes': (50407, 115554), 'test_sizes': (2559, 2560)},
    'sport_cloth': {'user_count': 9928, 'item_counts': (30796, 39008), 'train_sizes': (92612, 87829), 'test_sizes': (8326, 7540)},
    'sport_phone': {'user_count': 4998, 'item_counts': (20845, 13655), 'train_sizes': (50558, 42446), 'test_sizes': (3698, 3999)},
    'elec_cloth': {'user_count': 15761, 'item_counts': (51447, 48781), 'train_sizes': (210865, 121083), 'test_sizes': (13824, 12526)},
}

_LINE_PATTERN = re.compile(r'line (\d+)')


def read_interaction_file(path, delimiter='\t') -> pd.DataFrame:
    """
    Reads one delimited file with a header row; every value is kept as a string id.

    Raises
    ------
    DataFormatError
        On an empty file, a row with the wrong number of fields, a missing
        column or an empty id (the message carries the line number).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, engine='python', keep_default_na=False)
    except FileNotFoundError as exc:
        raise DataFormatError('file not found', path=path) from exc
    except pd.errors.EmptyDataError as exc:
        raise DataFormatError('no interactions', path=path) from exc
    except pd.errors.ParserError as exc:
        match = _LINE_PATTERN.search(str(exc))
        line = int(match.group(1)) if match else None
        raise DataFormatError(f'malformed row ({exc})', path=path, line=line) from exc

    missing = [column for column in REQUIRED_COLUMNS if column not in frame.columns]
    if missing:
        raise DataFormatError(f'missing columns {missing}', path=path, line=1)
    if frame.empty:
        raise DataFormatError('no interactions', path=path)

    for column in REQUIRED_COLUMNS:
        blank = frame[column].str.strip() == ''
        if blank.any():
            # +2: one for the header, one for 1-based numbering
            raise DataFormatError(f'empty {column}', path=path, line=int(np.flatnonzero(blank.to_numpy())[0]) + 2)
    return frame


def _order_rows(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Orders rows by timestamp when one is given (stable, so file order breaks
    ties) and drops repeated (user, item) pairs keeping the first occurrence.
    """
    if TIMESTAMP_COLUMN in frame.columns:
        order = pd.to_numeric(frame[TIMESTAMP_COLUMN], errors='coerce')
        if order.isna().any():
            order = pd.to_datetime(frame[TIMESTAMP_COLUMN], errors='coerce')
        frame = frame.assign(_order=order).sort_values('_order', kind='stable').drop(columns='_order')
    return frame.drop_duplicates(subset=list(REQUIRED_COLUMNS), keep='first').reset_index(drop=True)


def _split_by_domain(frame: pd.DataFrame, path) -> dict:
    tags = sorted(frame[DOMAIN_COLUMN].unique())
    if len(tags) != 2:
        raise DataFormatError(f'expected exactly two domain tags, found {tags}', path=path)
    logger.info('Domain tags %s -> A, %s -> B', tags[0], tags[1])
    return {domain: frame[frame[DOMAIN_COLUMN] == tag].drop(columns=DOMAIN_COLUMN) for domain, tag in zip(DOMAINS, tags)}


def _read_domains(paths, delimiter) -> dict:
    paths = [Path(p) for p in paths]
    if len(paths) == 1:
        frame = read_interaction_file(paths[0], delimiter)
        if DOMAIN_COLUMN not in frame.columns:
            raise DataFormatError(f'a single input file needs a {DOMAIN_COLUMN!r} column', path=paths[0], line=1)
        frames = _split_by_domain(frame, paths[0])
    elif len(paths) == 2:
        frames = {domain: read_interaction_file(path, delimiter) for domain, path in zip(DOMAINS, paths)}
    else:
        raise DataFormatError(f'expected one or two input files, got {len(paths)}')
    return {domain: _order_rows(frame) for domain, frame in frames.items()}


def _check_shared_users(frames: dict):
    users = {domain: set(frame['user_id']) for domain, frame in frames.items()}
    only_a = users[Domain.A] - users[Domain.B]
    only_b = users[Domain.B] - users[Domain.A]
    if only_a or only_b:
        raise DataFormatError(
            f'{len(only_a)} users appear only in domain A and {len(only_b)} only in domain B; '
            'both domains must share the full user set'
        )


def leave_one_out(pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Holds out the last row of every user that has at least two rows.
    Rows are assumed to be in interaction order.
    """
    frame = pd.DataFrame(pairs, columns=['user', 'item'])
    remaining = frame.groupby('user').cumcount(ascending=False)
    sizes = frame.groupby('user')['item'].transform('size')
    is_test = ((remaining == 0) & (sizes >= 2)).to_numpy()
    return pairs[~is_test], pairs[is_test]


def load_interactions(paths, delimiter='\t', test_paths=None) -> DomainDataset:
    """
    Builds a DomainDataset from delimited files.

    `paths` holds one file (with a domain column) or two files (A then B).
    `test_paths`, when given, has the same shape and provides the test split
    explicitly; matching rows are removed from the train side.
    """
    frames = _read_domains(paths, delimiter)
    test_frames = _read_domains(test_paths, delimiter) if test_paths else None

    pooled = {d: pd.concat([frames[d]] + ([test_frames[d]] if test_frames else [])) for d in DOMAINS}
    _check_shared_users(pooled)

    user_ids = np.unique(np.concatenate([pooled[d]['user_id'].to_numpy() for d in DOMAINS]))
    user_index = pd.Index(user_ids)
    item_ids, train, test = {}, {}, {}
    for domain in DOMAINS:
        item_ids[domain] = np.unique(pooled[domain]['item_id'].to_numpy())
        item_index = pd.Index(item_ids[domain])

        def encode(frame):
            return np.stack([
                user_index.get_indexer(frame['user_id']),
                item_index.get_indexer(frame['item_id']),
            ], axis=1).astype(np.int64)

        pairs = encode(frames[domain])
        if test_frames is None:
            train[domain], test[domain] = leave_one_out(pairs)
        else:
            held_out = encode(_single_positive_per_user(test_frames[domain], domain))
            keys = pairs[:, 0] * len(item_ids[domain]) + pairs[:, 1]
            held_keys = held_out[:, 0] * len(item_ids[domain]) + held_out[:, 1]
            leaked = np.isin(keys, held_keys)
            if leaked.any():
                logger.warning('Dropped %d train rows of domain %s that are test positives', int(leaked.sum()), domain.value)
            train[domain], test[domain] = pairs[~leaked], held_out

    dataset = DomainDataset(
        user_count=len(user_ids),
        item_counts=(len(item_ids[Domain.A]), len(item_ids[Domain.B])),
        train_interactions=train,
        test_interactions=test,
        user_ids=user_ids,
        item_ids=item_ids,
    )
    logger.info('Loaded %s', dataset.summary())
    return dataset


def _single_positive_per_user(frame: pd.DataFrame, domain) -> pd.DataFrame:
    duplicated = frame.duplicated(subset='user_id', keep='last')
    if duplicated.any():
        logger.warning('Domain %s: kept the last of several test rows for %d users', domain.value, int(duplicated.sum()))
    return frame[~duplicated]


def check_preset(dataset: DomainDataset, name: str) -> list[str]:
    """
    Compares a loaded dataset with the published statistics of a scenario.
    Returns human-readable mismatches; an empty list means an exact match.
    """
    expected = DATASET_PRESETS[name]
    summary = dataset.summary()
    mismatches = []
    if summary['user_count'] != expected['user_count']:
        mismatches.append(f"users: {summary['user_count']} != {expected['user_count']}")
    for key in ('item_counts', 'train_sizes', 'test_sizes'):
        for domain, value in zip(DOMAINS, expected[key]):
            if summary[key][domain.value] != value:
                mismatches.append(f'{key} {domain.value}: {summary[key][domain.value]} != {value}')
    return mismatches
