"""
Parameter container for the cross-domain model: the six embedding tables
plus the projector, variational and reconstruction heads of both domains.
"""
import logging
import math

import torch
from torch import nn

from interactions.services.types import DOMAINS, DomainDataset
from .alignment import ProjectorHead
from .disentangle import Reconstructor, VariationalNet

logger = logging.getLogger(__name__)


class CrossDomainNetwork(nn.Module):
    """
    Tables are kept in ModuleDicts keyed by domain tag ('A' / 'B'):
    `user_t` (U_t), `user_s` (U_s), `items` (V). Heads follow the same keys.
    """
    def __init__(self, user_count: int, item_counts, dim: int, layers: int = 2, *, projector_hidden: int = 64,
                 variational_hidden: int = None, reconstructor_hidden: int = 256, logvar_clamp: float = 10.0):
        super().__init__()
        if dim < 1:
            raise ValueError(f'embedding dimension must be >= 1, got {dim}')
        self.dim = dim
        self.layers = layers
        keys = [domain.value for domain in DOMAINS]
        self.user_t = nn.ModuleDict({key: nn.Embedding(user_count, dim) for key in keys})
        self.user_s = nn.ModuleDict({key: nn.Embedding(user_count, dim) for key in keys})
        self.items = nn.ModuleDict({key: nn.Embedding(count, dim) for key, count in zip(keys, item_counts)})
        self.projectors = nn.ModuleDict({key: ProjectorHead(dim, projector_hidden) for key in keys})
        self.variational = nn.ModuleDict({
            key: VariationalNet(dim, variational_hidden, logvar_clamp) for key in keys
        })
        self.reconstructors = nn.ModuleDict({key: Reconstructor(dim, reconstructor_hidden) for key in keys})

    def raw_user_rows(self, users) -> dict:
        """(u_t, u_s) embedding rows per domain, the reconstruction targets."""
        users = torch.as_tensor(users, dtype=torch.long)
        return {
            domain: (self.user_t[domain.value](users), self.user_s[domain.value](users))
            for domain in DOMAINS
        }

    def main_parameters(self):
        """Everything except the variational heads."""
        return [param for name, param in self.named_parameters() if not name.startswith('variational.')]

    def variational_parameters(self):
        return list(self.variational.parameters())

    def reset_parameters(self, generator: torch.Generator):
        """
        Embeddings ~ N(0, 1/d); linear weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
        Deterministic given the generator state.
        """
        std = 1.0 / math.sqrt(self.dim)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Embedding):
                    module.weight.normal_(0.0, std, generator=generator)
                elif isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    module.weight.uniform_(-bound, bound, generator=generator)
                    module.bias.uniform_(-bound, bound, generator=generator)


def build_network(dataset: DomainDataset, config) -> CrossDomainNetwork:
    return CrossDomainNetwork(
        dataset.user_count,
        dataset.item_counts,
        config.d,
        config.layers,
        projector_hidden=config.projector_hidden,
        variational_hidden=config.variational_hidden,
        reconstructor_hidden=config.reconstructor_hidden,
        logvar_clamp=config.logvar_clamp,
    )


def init_parameters(dataset: DomainDataset, config, generator: torch.Generator = None) -> CrossDomainNetwork:
    """Builds the network for `dataset` and initializes it from `config.seed` (or `generator`)."""
    if generator is None:
        generator = torch.Generator().manual_seed(config.seed)
    network = build_network(dataset, config)
    network.reset_parameters(generator)
    logger.debug('Initialized network with %d parameters (d=%d, layers=%d)',
                 sum(p.numel() for p in network.parameters()), config.d, config.layers)
    return network
