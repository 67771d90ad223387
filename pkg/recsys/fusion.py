"""
Target-aware feature combination (TAFC), dot-product scoring and the
binary cross-entropy objective.
"""
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from config.core.exceptions import DimensionError
from interactions.services.types import Domain
from .encoders import DisentangledBatch


@dataclass(frozen=True)
class FusedUserRep:
    """
    `e` is (..., d); `attention_weights` is (..., 3) ordered as
    (cross-domain h_t of the other domain, own h_t, own h_s).
    """
    e: torch.Tensor
    attention_weights: torch.Tensor


def _stack_reps(h_v: torch.Tensor, reps) -> torch.Tensor:
    if len(reps) != 3:
        raise DimensionError(f'expected three user representations, got {len(reps)}')
    stacked = torch.stack(list(reps), dim=-2)
    if stacked.shape[-1] != h_v.shape[-1]:
        raise DimensionError(f'item width {h_v.shape[-1]} does not match user width {stacked.shape[-1]}')
    return stacked


def tafc_fuse(h_v: torch.Tensor, reps) -> FusedUserRep:
    """
    Softmax over the three logits <h_v, rep_k> / sqrt(d), normalized jointly,
    then e = sum_k weight_k * rep_k. Broadcasts over leading dimensions.
    """
    stacked = _stack_reps(h_v, reps)
    dim = stacked.shape[-1]
    logits = (stacked * h_v.unsqueeze(-2)).sum(dim=-1) / math.sqrt(dim)
    weights = torch.softmax(logits, dim=-1)
    e = (weights.unsqueeze(-1) * stacked).sum(dim=-2)
    return FusedUserRep(e=e, attention_weights=weights)


def sum_pool(h_v: torch.Tensor, reps) -> FusedUserRep:
    """
    Unweighted sum of the triple. The reported weights are uniform (1/3 each)
    so they stay a probability vector; `e` is three times their combination.
    """
    stacked = _stack_reps(h_v, reps)
    e = stacked.sum(dim=-2)
    leading = h_v.shape[:-1]
    return FusedUserRep(
        e=e.expand(*leading, e.shape[-1]),
        attention_weights=torch.full((*leading, 3), 1.0 / 3.0, dtype=h_v.dtype),
    )


def predict(e: torch.Tensor, h_v: torch.Tensor) -> torch.Tensor:
    return (e * h_v).sum(dim=-1)


def bce_loss(scores: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Negative mean log-likelihood of logistic(scores), computed from logits."""
    scores = torch.as_tensor(scores)
    labels = torch.as_tensor(labels, dtype=scores.dtype)
    if scores.numel() == 0:
        raise ValueError('cross-entropy needs at least one labelled score')
    if scores.shape != labels.shape:
        raise DimensionError(f'{scores.numel()} scores but {labels.numel()} labels')
    return F.binary_cross_entropy_with_logits(scores, labels)


def domain_ce_sum(loss_a, loss_b):
    return loss_a + loss_b


def representation_triple(batch: DisentangledBatch, domain: Domain, rows=slice(None)):
    """(h_t of the other domain, h_t of `domain`, h_s of `domain`) for the given user rows."""
    return batch.h_t[domain.other][rows], batch.h_t[domain][rows], batch.h_s[domain][rows]


def fuse(h_v: torch.Tensor, reps, attention: bool = True) -> FusedUserRep:
    return tafc_fuse(h_v, reps) if attention else sum_pool(h_v, reps)


def score_pairs(batch: DisentangledBatch, domain: Domain, users, items, attention: bool = True) -> torch.Tensor:
    """One score per (user row, item row) pair, both index vectors of equal length."""
    users = torch.as_tensor(users, dtype=torch.long)
    items = torch.as_tensor(items, dtype=torch.long)
    h_v = batch.h_v[domain][items]
    fused = fuse(h_v, representation_triple(batch, domain, users), attention)
    return predict(fused.e, h_v)


def score_candidates(batch: DisentangledBatch, domain: Domain, users, candidates, attention: bool = True,
                     with_weights: bool = False):
    """
    Scores a (n_users, n_candidates) matrix of item indices for the given
    user rows. The fused user vector is recomputed per candidate item.
    Returns scores, plus the attention weights (n_users, n_candidates, 3)
    when `with_weights` is set.
    """
    users = torch.as_tensor(users, dtype=torch.long)
    candidates = torch.as_tensor(candidates, dtype=torch.long)
    if candidates.dim() != 2 or candidates.shape[0] != users.shape[0]:
        raise DimensionError(f'candidate matrix {tuple(candidates.shape)} does not match {users.shape[0]} users')
    h_v = batch.h_v[domain][candidates]
    stacked = torch.stack(representation_triple(batch, domain, users), dim=-1)
    # <e, h_v> = sum_k w_k <rep_k, h_v>; avoids materializing e per candidate
    dots = torch.bmm(h_v, stacked)
    if attention:
        weights = torch.softmax(dots / math.sqrt(stacked.shape[1]), dim=-1)
        scores = (weights * dots).sum(dim=-1)
    else:
        weights = torch.full_like(dots, 1.0 / 3.0)
        scores = dots.sum(dim=-1)
    if with_weights:
        return scores, weights
    return scores
