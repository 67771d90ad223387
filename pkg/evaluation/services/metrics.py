"""
Hit ratio and NDCG for a single held-out positive among sampled negatives.
Ties are resolved pessimistically: the positive ranks after every negative
with an equal score.
"""
import numpy as np


def _check_k(k: int):
    if k < 1:
        raise ValueError(f'cutoff K must be >= 1, got {k}')


def rank_of_positive(scores, positive_position: int = 0) -> int:
    scores = np.asarray(scores, dtype=np.float64)
    positive = scores[positive_position]
    others = np.delete(scores, positive_position)
    return 1 + int(np.count_nonzero(others >= positive))


def rank_metrics(scores, positive_position: int = 0, k: int = 10) -> tuple[int, float]:
    """
    Returns (hr, ndcg) for one user: hr is 1 when the rank r of the positive
    is at most k, and ndcg = 1 / log2(r + 1) in that case (0 otherwise).
    """
    _check_k(k)
    rank = rank_of_positive(scores, positive_position)
    if rank > k:
        return 0, 0.0
    return 1, float(1.0 / np.log2(rank + 1))


def batch_rank_metrics(scores: np.ndarray, k: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized rank_metrics over an (n_users, n_candidates) matrix whose
    first column holds the positive's score.
    """
    _check_k(k)
    scores = np.asarray(scores, dtype=np.float64)
    ranks = 1 + np.count_nonzero(scores[:, 1:] >= scores[:, :1], axis=1)
    hits = (ranks <= k).astype(np.int64)
    gains = np.where(hits == 1, 1.0 / np.log2(ranks + 1), 0.0)
    return hits, gains
