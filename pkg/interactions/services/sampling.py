"""
Negative sampling for training labels and for evaluation candidate sets.
Every function takes an explicit seed or generator; callers that sample in
parallel must shard seeds themselves.
"""
import logging

import numpy as np

from config.core.exceptions import SamplingError
from .types import CandidateSet, Domain, DomainDataset

logger = logging.getLogger(__name__)


def sample_training_negatives(dataset: DomainDataset, domain: Domain, batch_positives, ratio: int,
                              rng: np.random.Generator) -> np.ndarray:
    """
    Labels a batch of positives and adds `ratio` negatives per positive.

    Negatives are drawn uniformly from the items outside the user's
    interaction set (train and test). Returns an (n, 3) array of
    (user, item, label) rows: each positive (label 1) followed by its negatives (label 0).

    Raises
    ------
    SamplingError
        If ratio < 1 or a user has interacted with every item of the domain.
    """
    if ratio < 1:
        raise SamplingError(f'negative ratio must be at least 1, got {ratio}')
    domain = Domain(domain)
    seen = dataset.user_item_sets[domain]
    item_count = dataset.item_count(domain)

    rows = []
    for user, item in np.asarray(batch_positives, dtype=np.int64).reshape(-1, 2):
        excluded = seen[user]
        if len(excluded) >= item_count:
            raise SamplingError(f'user {user} has interacted with all {item_count} items of domain {domain.value}')
        rows.append((user, item, 1))
        for _ in range(ratio):
            draw = int(rng.integers(item_count))
            while draw in excluded:
                draw = int(rng.integers(item_count))
            rows.append((user, draw, 0))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def build_candidate_sets(dataset: DomainDataset, domain: Domain, seed: int, num_negatives: int = 999) -> list:
    """
    One CandidateSet per test positive of the domain, in user order.

    Users with fewer than `num_negatives` non-interacted items are skipped
    and counted in a warning. The generator is seeded from (seed, domain)
    so both domains draw independent but reproducible streams.
    """
    domain = Domain(domain)
    rng = np.random.default_rng([seed, domain.index])
    all_items = np.arange(dataset.item_count(domain))
    seen = dataset.user_item_sets[domain]

    candidate_sets, skipped = [], 0
    test = dataset.test(domain)
    for user, positive in test[np.argsort(test[:, 0], kind='stable')]:
        pool = np.setdiff1d(all_items, np.fromiter(seen[user], dtype=np.int64), assume_unique=True)
        if len(pool) < num_negatives:
            skipped += 1
            continue
        negatives = rng.choice(pool, size=num_negatives, replace=False)
        candidate_sets.append(CandidateSet(
            user_index=int(user),
            domain=domain,
            positive_item=int(positive),
            negatives=tuple(int(item) for item in negatives),
            seed=seed,
        ))
    if skipped:
        logger.warning('Domain %s: skipped %d of %d test users with fewer than %d candidate negatives',
                       domain.value, skipped, len(test), num_negatives)
    return candidate_sets


def stack_candidates(candidate_sets) -> tuple[np.ndarray, np.ndarray]:
    """
    Users (n,) and candidate items (n, 1 + negatives) with the positive in column 0.
    """
    if not candidate_sets:
        return np.empty(0, dtype=np.int64), np.empty((0, 0), dtype=np.int64)
    users = np.asarray([c.user_index for c in candidate_sets], dtype=np.int64)
    items = np.stack([c.items for c in candidate_sets])
    return users, items
