"""
Scores every user's candidate set and aggregates hit ratio / NDCG.

A scorer is any callable `(domain, users, items) -> scores` where users is
(n,) and items is (n, c); `NetworkScorer` wraps a trained network. Users
are scored in shards of `batch_users`; shard results are concatenated, so
the aggregate equals the user-weighted mean of the shard means.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from config.core.exceptions import DataFormatError
from interactions.services.sampling import stack_candidates
from interactions.services.types import DOMAINS, Domain
from recsys.encoders import encode_full
from recsys.fusion import score_candidates
from .metrics import batch_rank_metrics

logger = logging.getLogger(__name__)


class NetworkScorer:
    """
    Frozen snapshot of a network's representations. The graphs are encoded
    once on construction; scoring afterwards only gathers rows.
    """
    def __init__(self, network, graphs, attention: bool = True):
        self.attention = attention
        with torch.no_grad():
            self.representations = encode_full(network, graphs)

    def __call__(self, domain: Domain, users, items) -> np.ndarray:
        with torch.no_grad():
            scores = score_candidates(self.representations, domain, torch.from_numpy(users),
                                      torch.from_numpy(items), attention=self.attention)
        return scores.double().numpy()

    def attention_weights(self, domain: Domain, users, items) -> np.ndarray:
        with torch.no_grad():
            _, weights = score_candidates(self.representations, domain, torch.from_numpy(users),
                                          torch.from_numpy(items), attention=self.attention, with_weights=True)
        return weights.double().numpy()


@dataclass
class DomainMetrics:
    """HR / NDCG as percentages plus the per-user outcomes they average."""
    domain: Domain
    hr: float
    ndcg: float
    users: np.ndarray = field(repr=False)
    hits: np.ndarray = field(repr=False)
    gains: np.ndarray = field(repr=False)

    @property
    def user_count(self) -> int:
        return len(self.users)

    def to_dict(self) -> dict:
        return {'domain': self.domain.value, 'hr': self.hr, 'ndcg': self.ndcg, 'users': self.user_count}


@dataclass
class EvalReport:
    k: int
    domains: dict
    config_hash: str = ''
    seed: int = None
    epoch: int = None
    sparsity: list = None

    def metrics(self, domain) -> DomainMetrics:
        return self.domains[Domain(domain)]

    def to_dict(self) -> dict:
        data = {
            'k': self.k,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'epoch': self.epoch,
            'domains': {d.value: m.to_dict() for d, m in self.domains.items()},
        }
        if self.sparsity is not None:
            data['sparsity'] = [cell.to_dict() for cell in self.sparsity]
        return data


def _as_percent(values: np.ndarray) -> float:
    return float(100.0 * values.mean()) if len(values) else 0.0


def candidate_matrix(candidate_sets, num_negatives: int = None) -> tuple[np.ndarray, np.ndarray]:
    """
    (users, items) with the positive in column 0, truncated to the first
    `num_negatives` negatives when given.
    """
    users, items = stack_candidates(candidate_sets)
    if num_negatives is not None:
        available = items.shape[1] - 1
        if available < num_negatives:
            raise DataFormatError(
                f'prepared candidate sets carry {available} negatives, {num_negatives} requested'
            )
        items = items[:, :num_negatives + 1]
    return users, items


def evaluate_domain(scorer, domain: Domain, candidate_sets, k: int = 10, batch_users: int = 256,
                    num_negatives: int = None) -> DomainMetrics:
    """
    Ranks each user's held-out positive among its candidates.

    Raises
    ------
    DataFormatError
        If no candidate sets were built for the domain.
    """
    domain = Domain(domain)
    if not candidate_sets:
        raise DataFormatError(f'no candidate sets for domain {domain.value}; was the dataset prepared?')
    users, items = candidate_matrix(candidate_sets, num_negatives)
    hits, gains = [], []
    for start in range(0, len(users), batch_users):
        shard = slice(start, start + batch_users)
        shard_hits, shard_gains = batch_rank_metrics(scorer(domain, users[shard], items[shard]), k)
        hits.append(shard_hits)
        gains.append(shard_gains)
    hits, gains = np.concatenate(hits), np.concatenate(gains)
    return DomainMetrics(domain=domain, hr=_as_percent(hits), ndcg=_as_percent(gains), users=users, hits=hits, gains=gains)


def evaluate(scorer, candidates: dict, k: int = 10, batch_users: int = 256, num_negatives: int = None,
             domains=DOMAINS, **report_fields) -> EvalReport:
    metrics = {
        domain: evaluate_domain(scorer, domain, candidates.get(domain), k, batch_users, num_negatives)
        for domain in domains
    }
    for domain_metrics in metrics.values():
        logger.debug('Domain %s: HR@%d %.2f NDCG@%d %.2f over %d users', domain_metrics.domain.value,
                     k, domain_metrics.hr, k, domain_metrics.ndcg, domain_metrics.user_count)
    return EvalReport(k=k, domains=metrics, **report_fields)
