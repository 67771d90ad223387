"""
Metrics broken down by how many train interactions a user has in each domain.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd

from interactions.services.types import Domain, DomainDataset

DEFAULT_BUCKETS = ((1, 10), (11, 20), (21, 30), (31, None))
OTHER = 'other'


def bucket_label(bounds) -> str:
    low, high = bounds
    return f'>{low - 1}' if high is None else f'{low}-{high}'


def assign_buckets(counts, buckets=DEFAULT_BUCKETS) -> np.ndarray:
    """
    Labels each count with its bucket; both bounds are inclusive.
    Counts outside every bucket (e.g. zero) are labelled 'other'.
    """
    counts = np.asarray(counts)
    labels = np.full(counts.shape, OTHER, dtype=object)
    for bounds in buckets:
        low, high = bounds
        inside = counts >= low if high is None else (counts >= low) & (counts <= high)
        labels[inside] = bucket_label(bounds)
    return labels


@dataclass(frozen=True)
class SparsityCell:
    domain: Domain
    bucket_a: str
    bucket_b: str
    users: int
    hr: float
    ndcg: float

    def to_dict(self) -> dict:
        return {
            'domain': self.domain.value, 'bucket_a': self.bucket_a, 'bucket_b': self.bucket_b,
            'users': self.users, 'hr': self.hr, 'ndcg': self.ndcg,
        }


def sparsity_report(report, dataset: DomainDataset, buckets=DEFAULT_BUCKETS) -> list:
    """
    One cell per populated (bucket in A, bucket in B) pair and evaluated
    domain, built from the per-user outcomes kept in `report`. Empty pairs
    are absent from the result.
    """
    cells = []
    for domain, metrics in report.domains.items():
        frame = pd.DataFrame({
            'bucket_a': assign_buckets(dataset.train_counts[Domain.A][metrics.users], buckets),
            'bucket_b': assign_buckets(dataset.train_counts[Domain.B][metrics.users], buckets),
            'hit': metrics.hits,
            'gain': metrics.gains,
        })
        grouped = frame.groupby(['bucket_a', 'bucket_b'], sort=True).agg(
            users=('hit', 'size'), hr=('hit', 'mean'), ndcg=('gain', 'mean'),
        )
        for (bucket_a, bucket_b), row in grouped.iterrows():
            cells.append(SparsityCell(
                domain=domain,
                bucket_a=bucket_a,
                bucket_b=bucket_b,
                users=int(row['users']),
                hr=float(100.0 * row['hr']),
                ndcg=float(100.0 * row['ndcg']),
            ))
    return cells
