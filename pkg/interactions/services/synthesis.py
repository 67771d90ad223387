"""
Synthetic cross-domain datasets with a controllable amount of shared and
source-exclusive user preference.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from interactions.serializers import SyntheticSpecSerializer
from .loaders import leave_one_out
from .types import DOMAINS, Domain, DomainDataset, SyntheticSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SyntheticLatents:
    """Ground-truth factors behind a synthetic dataset."""
    users: dict
    items: dict
    exclusive: np.ndarray
    mixing: np.ndarray


def _signed_derangement(size: int, rng: np.random.Generator) -> np.ndarray:
    """
    A signed permutation matrix without fixed points: every coordinate of the
    source-exclusive signal lands on a different coordinate in domain B.
    """
    order = rng.permutation(size)
    signs = rng.choice((-1.0, 1.0), size=size)
    mixing = np.zeros((size, size))
    mixing[order, np.roll(order, -1)] = signs
    return mixing


def generate_latents(spec: SyntheticSpec) -> SyntheticLatents:
    """
    Draws user and item factors.

    Per domain the user factor is s*z + sqrt(1 - s^2)*p_domain, where z is
    shared and p_domain private. The source-exclusive signal x is added as
    e*x in domain A and as e*(x P) in domain B, so it is informative for B
    without being coordinate-aligned with A.
    """
    SyntheticSpecSerializer(data=asdict(spec)).is_valid(raise_exception=True)
    rng = np.random.default_rng(spec.seed)
    size = (spec.user_count, spec.latent_dim)

    shared = rng.standard_normal(size)
    private = {domain: rng.standard_normal(size) for domain in DOMAINS}
    exclusive = rng.standard_normal(size)
    mixing = _signed_derangement(spec.latent_dim, rng)

    own = np.sqrt(max(0.0, 1.0 - spec.shared_strength ** 2))
    source_signal = {
        Domain.A: exclusive,
        Domain.B: exclusive @ mixing,
    }
    users = {
        domain: spec.shared_strength * shared + own * private[domain] + spec.exclusive_strength * source_signal[domain]
        for domain in DOMAINS
    }
    items = {domain: rng.standard_normal((spec.item_counts[domain.index], spec.latent_dim)) for domain in DOMAINS}
    return SyntheticLatents(users=users, items=items, exclusive=exclusive, mixing=mixing)


def synthesize_dataset(spec: SyntheticSpec) -> DomainDataset:
    """
    Samples interactions from the latents: each user keeps the items whose
    noisy scaled dot product clears that user's top-m threshold
    (m = interactions_per_user). Rows are shuffled per user and the last one
    is held out for test. Deterministic given spec.seed.
    """
    latents = generate_latents(spec)
    # separate stream so changing the sampling never shifts the latents
    rng = np.random.default_rng([spec.seed, 1])
    scale = np.sqrt(spec.latent_dim)

    train, test = {}, {}
    for domain in DOMAINS:
        affinity = latents.users[domain] @ latents.items[domain].T / scale
        affinity += spec.noise * rng.standard_normal(affinity.shape)
        threshold = -np.sort(-affinity, axis=1)[:, spec.interactions_per_user - 1:spec.interactions_per_user]
        rows = []
        for user in range(spec.user_count):
            kept = np.flatnonzero(affinity[user] >= threshold[user])[:spec.interactions_per_user]
            for item in rng.permutation(kept):
                rows.append((user, item))
        train[domain], test[domain] = leave_one_out(np.asarray(rows, dtype=np.int64))

    dataset = DomainDataset(
        user_count=spec.user_count,
        item_counts=tuple(spec.item_counts),
        train_interactions=train,
        test_interactions=test,
    )
    logger.info('Synthesized %s (shared %.2f, exclusive %.2f)', dataset.summary(), spec.shared_strength, spec.exclusive_strength)
    return dataset
