"""
Intra-domain disentanglement: a CLUB-style mutual information upper bound
between h_t and h_s, and reconstruction of the raw embeddings.
"""
import math

import torch
from torch import nn

from config.core.exceptions import DimensionError, NumericalError
from interactions.services.types import DOMAINS
from .encoders import DisentangledBatch

LOG_2PI = math.log(2.0 * math.pi)


class VariationalNet(nn.Module):
    """
    q(h_t | h_s): a diagonal Gaussian whose mean and log-variance are
    predicted from h_s by a two-hidden-layer ReLU trunk.
    """
    def __init__(self, dim: int, hidden: int = None, logvar_clamp: float = 10.0):
        super().__init__()
        hidden = hidden or 2 * dim
        self.logvar_clamp = logvar_clamp
        self.trunk = nn.Sequential(
            nn.Linear(dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, hidden),
            nn.ReLU(),
        )
        self.mean = nn.Linear(hidden, dim)
        self.log_variance = nn.Linear(hidden, dim)

    def forward(self, h_s):
        features = self.trunk(h_s)
        log_variance = self.log_variance(features).clamp(-self.logvar_clamp, self.logvar_clamp)
        return self.mean(features), log_variance


def gaussian_log_density(x: torch.Tensor, mean: torch.Tensor, log_variance: torch.Tensor) -> torch.Tensor:
    """Elementwise log N(x; mean, exp(log_variance))."""
    return -0.5 * (LOG_2PI + log_variance + (x - mean) ** 2 / log_variance.exp())


def _check_rows(h_t, h_s):
    if h_t.shape != h_s.shape:
        raise DimensionError(f'h_t {tuple(h_t.shape)} and h_s {tuple(h_s.shape)} are not row-aligned')


def variational_log_likelihood(net: nn.Module, h_t: torch.Tensor, h_s: torch.Tensor, index=None) -> torch.Tensor:
    """
    Mean over rows of log q(h_t | h_s). Ascended by the inner fitting loop.

    Raises
    ------
    NumericalError
        If the network produces non-finite outputs; `index` (the batch
        number) is attached to the message.
    """
    _check_rows(h_t, h_s)
    mean, log_variance = net(h_s)
    if not (torch.isfinite(mean).all() and torch.isfinite(log_variance).all()):
        raise NumericalError('variational network produced non-finite activations', index=index)
    return gaussian_log_density(h_t, mean, log_variance).sum(dim=1).mean()


def club_mi_loss(net: nn.Module, h_t: torch.Tensor, h_s: torch.Tensor, generator: torch.Generator = None,
                 permutation: torch.Tensor = None) -> torch.Tensor:
    """
    CLUB estimate: mean_i [log q(h_t_i | h_s_i) - log q(h_t_pi(i) | h_s_i)]
    with pi a uniform random permutation of the rows (fixed points allowed).
    Pass `permutation` to pin pi.
    """
    _check_rows(h_t, h_s)
    rows = h_t.shape[0]
    if rows < 2:
        raise DimensionError('the mutual information estimate needs at least two rows to shuffle')
    if permutation is None:
        permutation = torch.randperm(rows, generator=generator)
    mean, log_variance = net(h_s)
    positive = gaussian_log_density(h_t, mean, log_variance).sum(dim=1)
    negative = gaussian_log_density(h_t[permutation], mean, log_variance).sum(dim=1)
    return (positive - negative).mean()


def total_mi_loss(loss_a, loss_b, beta_a: float, beta_b: float):
    return beta_a * loss_a + beta_b * loss_b


class Reconstructor(nn.Module):
    """Maps concat(h_t, h_s) (2d) back to the raw concat(u_t, u_s) (2d)."""
    def __init__(self, dim: int, hidden: int = 256):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(2 * dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, 2 * dim),
        )

    def forward(self, x):
        return self.layers(x)


def domain_reconstruction_error(reconstructor: nn.Module, h_t, h_s, u_t, u_s) -> torch.Tensor:
    """
    Mean over rows of ||R(concat(h_t, h_s)) - concat(u_t, u_s)||^2.
    The targets are detached: no gradient reaches the raw embeddings through them.
    """
    _check_rows(h_t, h_s)
    prediction = reconstructor(torch.cat([h_t, h_s], dim=1))
    target = torch.cat([u_t, u_s], dim=1).detach()
    if prediction.shape != target.shape:
        raise DimensionError(f'reconstruction {tuple(prediction.shape)} does not match target {tuple(target.shape)}')
    return ((prediction - target) ** 2).sum(dim=1).mean()


def reconstruction_loss(reconstructors, batch: DisentangledBatch, raw: dict, gamma_a: float, gamma_b: float):
    """
    gamma_A * err_A + gamma_B * err_B, where `raw[domain]` holds the
    pre-encoder rows (u_t, u_s) of the batch users and `reconstructors` maps
    domain tags to Reconstructor modules.
    """
    errors = {
        domain: domain_reconstruction_error(
            reconstructors[domain.value], batch.h_t[domain], batch.h_s[domain], *raw[domain]
        )
        for domain in DOMAINS
    }
    a, b = DOMAINS
    return gamma_a * errors[a] + gamma_b * errors[b]
