"""
Inter-domain alignment: kernel MMD, gradient reversal, projector heads and
the domain-constrained MMD loss.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from config.core.exceptions import DimensionError
from interactions.services.types import Domain
from .encoders import DisentangledBatch

DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelConfig:
    """
    Radial-basis kernel family. With `bandwidths` set, those values are used
    as is; otherwise the median pairwise distance of the pooled batch is
    scaled by each of `multipliers`.

    The median bandwidth is a stop-gradient: it is recomputed every batch but
    treated as a constant by autograd, so loss gradients are taken at fixed
    bandwidths.
    """
    multipliers: tuple = DEFAULT_MULTIPLIERS
    bandwidths: tuple | None = None

    def __post_init__(self):
        values = self.bandwidths if self.bandwidths is not None else self.multipliers
        if not values or any(v <= 0 for v in values):
            raise ValueError('kernel bandwidths and multipliers must be strictly positive')

    def sigmas(self, *squared_blocks: torch.Tensor) -> torch.Tensor:
        """Bandwidths for one MMD evaluation, given its squared-distance blocks."""
        reference = squared_blocks[0]
        if self.bandwidths is not None:
            return torch.tensor(self.bandwidths, dtype=reference.dtype)
        with torch.no_grad():
            pooled = torch.cat([block.flatten() for block in squared_blocks])
            positive = pooled[pooled > 0]
            base = positive.median().sqrt() if positive.numel() else torch.ones((), dtype=reference.dtype)
        return base * torch.tensor(self.multipliers, dtype=reference.dtype)


def _squared_distances(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    # Direct differences (not the matmul expansion) so entry (i, j) of
    # (x, y) equals entry (j, i) of (y, x) bit for bit.
    return torch.cdist(x, y, compute_mode='donot_use_mm_for_euclid_dist').pow(2)


def _order_free_mean(values: torch.Tensor) -> torch.Tensor:
    """Mean over a sorted copy, so the result does not depend on row order."""
    return torch.sort(values.flatten()).values.mean()


def _rbf(squared: torch.Tensor, sigmas: torch.Tensor) -> torch.Tensor:
    return torch.exp(-squared.unsqueeze(-1) / (2.0 * sigmas ** 2)).sum(dim=-1)


def _safe_sqrt(value: torch.Tensor) -> torch.Tensor:
    # sqrt has an infinite slope at 0; route that case to an exact zero.
    return torch.where(value > 0, value.clamp_min(1e-12).sqrt(), torch.zeros_like(value))


def mmd(x: torch.Tensor, y: torch.Tensor, kernel: KernelConfig = KernelConfig()) -> torch.Tensor:
    """
    Biased (V-statistic) maximum mean discrepancy between the rows of x and y,
    summed over the kernel bandwidths and returned as a norm (square root of
    the clamped squared estimate).
    """
    if x.dim() != 2 or y.dim() != 2 or x.shape[1] != y.shape[1]:
        raise DimensionError(f'mmd needs two (n, d) matrices of equal width, got {tuple(x.shape)} and {tuple(y.shape)}')
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise DimensionError('mmd needs at least one row on each side')
    xx, yy, xy = _squared_distances(x, x), _squared_distances(y, y), _squared_distances(x, y)
    sigmas = kernel.sigmas(xx, yy, xy)
    squared = _order_free_mean(_rbf(xx, sigmas)) + _order_free_mean(_rbf(yy, sigmas)) - 2.0 * _order_free_mean(_rbf(xy, sigmas))
    return _safe_sqrt(squared)


class _GradientReversal(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, scale):
        ctx.scale = scale
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg() * ctx.scale, None


def gradient_reversal(x: torch.Tensor, scale: float = 1.0) -> torch.Tensor:
    """Identity forward; the backward pass multiplies gradients by -scale."""
    if scale <= 0:
        raise ValueError(f'reversal scale must be positive, got {scale}')
    return _GradientReversal.apply(x, scale)


class ProjectorHead(nn.Module):
    """
    Two-layer feedforward head mapping domain-specific reps back into the
    space of the domain-encompassing reps (output width = dim).
    """
    def __init__(self, dim: int, hidden: int = 64):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, dim),
        )

    def forward(self, x):
        return self.layers(x)


def dc_mmd_loss(batch: DisentangledBatch, projectors, kernel: KernelConfig = KernelConfig(),
                symmetric: bool = True, grl_scale: float = 1.0) -> torch.Tensor:
    """
    Domain-constrained MMD.

    term 1: mmd(h_t_A, h_t_B) aligns the encompassing reps across domains.
    term 2: mmd(h_t_A, G_B(GRL(h_s_B))); the reversal makes the domain-B
            specific encoder ascend this term while G_B and h_t_A descend it.
    term 3 (symmetric only): mmd(h_t_B, G_A(GRL(h_s_A))).
    `projectors` maps domain tags 'A'/'B' to ProjectorHead modules.
    """
    a, b = Domain.A, Domain.B
    loss = mmd(batch.h_t[a], batch.h_t[b], kernel)
    loss = loss + mmd(batch.h_t[a], projectors[b.value](gradient_reversal(batch.h_s[b], grl_scale)), kernel)
    if symmetric:
        loss = loss + mmd(batch.h_t[b], projectors[a.value](gradient_reversal(batch.h_s[a], grl_scale)), kernel)
    return loss
