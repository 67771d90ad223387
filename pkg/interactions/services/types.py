from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from config.core.exceptions import DataFormatError


class Domain(str, Enum):
    A = 'A'
    B = 'B'

    @property
    def other(self) -> 'Domain':
        return Domain.B if self is Domain.A else Domain.A

    @property
    def index(self) -> int:
        return 0 if self is Domain.A else 1


DOMAINS = (Domain.A, Domain.B)


def _as_pairs(rows) -> np.ndarray:
    pairs = np.asarray(rows, dtype=np.int64)
    if pairs.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    return pairs.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """
    Two implicit-feedback domains over one shared user set.

    Interaction splits are (n, 2) integer arrays of (user_index, item_index)
    rows. Vocabularies map contiguous indices back to the original ids.
    Instances are immutable once built and may be shared between workers.
    """
    user_count: int
    item_counts: tuple[int, int]
    train_interactions: dict
    test_interactions: dict
    user_ids: np.ndarray = None
    item_ids: dict = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'train_interactions', {d: _as_pairs(self.train_interactions[d]) for d in DOMAINS})
        object.__setattr__(self, 'test_interactions', {d: _as_pairs(self.test_interactions[d]) for d in DOMAINS})
        if self.user_ids is None:
            object.__setattr__(self, 'user_ids', np.arange(self.user_count).astype(str))
        if self.item_ids is None:
            object.__setattr__(self, 'item_ids', {d: np.arange(self.item_count(d)).astype(str) for d in DOMAINS})
        self._validate()

    def _validate(self):
        if self.user_count < 1 or min(self.item_counts) < 1:
            raise DataFormatError('user and item counts must be positive')
        for domain in DOMAINS:
            for split, pairs in (('train', self.train(domain)), ('test', self.test(domain))):
                if len(pairs) == 0:
                    continue
                users, items = pairs[:, 0], pairs[:, 1]
                if users.min() < 0 or users.max() >= self.user_count:
                    raise DataFormatError(f'{split} {domain.value}: user index out of range')
                if items.min() < 0 or items.max() >= self.item_count(domain):
                    raise DataFormatError(f'{split} {domain.value}: item index out of range')
                if len(np.unique(self._keys(domain, pairs))) != len(pairs):
                    raise DataFormatError(f'{split} {domain.value}: duplicate (user, item) pairs')
            overlap = np.intersect1d(self._keys(domain, self.train(domain)), self._keys(domain, self.test(domain)))
            if len(overlap):
                raise DataFormatError(f'{len(overlap)} test positives of domain {domain.value} also appear in train')

    def _keys(self, domain, pairs):
        return pairs[:, 0] * self.item_count(domain) + pairs[:, 1]

    def item_count(self, domain: Domain) -> int:
        return self.item_counts[Domain(domain).index]

    def train(self, domain: Domain) -> np.ndarray:
        return self.train_interactions[Domain(domain)]

    def test(self, domain: Domain) -> np.ndarray:
        return self.test_interactions[Domain(domain)]

    @cached_property
    def user_item_sets(self) -> dict:
        """
        Per domain, user index -> frozenset of items seen in train or test.
        """
        sets = {}
        for domain in DOMAINS:
            per_user = [set() for _ in range(self.user_count)]
            for pairs in (self.train(domain), self.test(domain)):
                for user, item in pairs:
                    per_user[user].add(int(item))
            sets[domain] = [frozenset(items) for items in per_user]
        return sets

    @cached_property
    def train_counts(self) -> dict:
        """Per domain, number of train interactions of every user."""
        return {d: np.bincount(self.train(d)[:, 0], minlength=self.user_count) for d in DOMAINS}

    def summary(self) -> dict:
        return {
            'user_count': self.user_count,
            'item_counts': {d.value: self.item_count(d) for d in DOMAINS},
            'train_sizes': {d.value: len(self.train(d)) for d in DOMAINS},
            'test_sizes': {d.value: len(self.test(d)) for d in DOMAINS},
        }


@dataclass(frozen=True)
class CandidateSet:
    """One held-out positive plus its sampled evaluation negatives."""
    user_index: int
    domain: Domain
    positive_item: int
    negatives: tuple
    seed: int

    @property
    def items(self) -> np.ndarray:
        """Positive first, then the negatives in sampled order."""
        return np.asarray((self.positive_item,) + tuple(self.negatives), dtype=np.int64)


@dataclass(frozen=True)
class SyntheticSpec:
    user_count: int = 500
    item_counts: tuple[int, int] = (200, 200)
    latent_dim: int = 16
    shared_strength: float = 0.8
    exclusive_strength: float = 0.5
    noise: float = 0.1
    interactions_per_user: int = 10
    seed: int = 0
