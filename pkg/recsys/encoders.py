"""
Light graph propagation encoders (no feature transforms, no nonlinearities).

Each domain has its own user-item bipartite graph built from train rows only,
with symmetric weights 1/sqrt(deg(u) * deg(v)). One propagation pass averages
layers 0..L of neighbour aggregation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import torch

from config.core.exceptions import DimensionError
from interactions.services.types import DOMAINS, Domain, DomainDataset


@dataclass(frozen=True, eq=False)
class PropagationGraph:
    user_count: int
    item_count: int
    adjacency: torch.Tensor

    @property
    def size(self) -> int:
        return self.user_count + self.item_count


def build_graph(user_count: int, item_count: int, pairs) -> PropagationGraph:
    """
    Normalized adjacency over users [0, U) and items [U, U + I).
    Zero-degree nodes keep an all-zero row and column.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    size = user_count + item_count
    users, items = pairs[:, 0], pairs[:, 1] + user_count
    rows = np.concatenate([users, items])
    cols = np.concatenate([items, users])
    adjacency = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size)).tocsr()

    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(degree)
    nonzero = degree > 0
    inv_sqrt[nonzero] = degree[nonzero] ** -0.5
    scale = sp.diags(inv_sqrt)
    normalized = (scale @ adjacency @ scale).tocoo()

    indices = torch.from_numpy(np.vstack([normalized.row, normalized.col]).astype(np.int64))
    values = torch.from_numpy(normalized.data.astype(np.float32))
    tensor = torch.sparse_coo_tensor(indices, values, size=(size, size)).coalesce()
    return PropagationGraph(user_count, item_count, tensor)


def build_graphs(dataset: DomainDataset) -> dict:
    """One propagation graph per domain, from train interactions only."""
    return {
        domain: build_graph(dataset.user_count, dataset.item_count(domain), dataset.train(domain))
        for domain in DOMAINS
    }


def propagate(user_embeddings: torch.Tensor, item_embeddings: torch.Tensor, graph: PropagationGraph,
              layers: int) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Returns (user reps, item reps): the mean of the layer-0..layers outputs of
    repeated normalized neighbour aggregation.
    """
    if layers < 0:
        raise ValueError(f'layers must be >= 0, got {layers}')
    if user_embeddings.shape[0] != graph.user_count or item_embeddings.shape[0] != graph.item_count:
        raise DimensionError(
            f'graph has {graph.user_count} users / {graph.item_count} items, tables have '
            f'{user_embeddings.shape[0]} / {item_embeddings.shape[0]} rows'
        )
    hidden = torch.cat([user_embeddings, item_embeddings], dim=0)
    adjacency = graph.adjacency.to(hidden.dtype)
    outputs = [hidden]
    for _ in range(layers):
        hidden = torch.sparse.mm(adjacency, hidden)
        outputs.append(hidden)
    combined = torch.stack(outputs, dim=0).mean(dim=0)
    return combined[:graph.user_count], combined[graph.user_count:]


@dataclass(frozen=True, eq=False)
class DisentangledBatch:
    """
    Encoder outputs keyed by Domain: h_t (domain-encompassing / invariant
    user reps), h_s (domain-specific user reps) and h_v (item reps).
    User rows are aligned across every user block: row i is the same user.
    """
    users: torch.Tensor
    h_t: dict
    h_s: dict
    h_v: dict

    def __post_init__(self):
        rows = {block[d].shape[0] for block in (self.h_t, self.h_s) for d in DOMAINS}
        if len(rows) != 1:
            raise DimensionError(f'user representation blocks are not row-aligned: {sorted(rows)} rows')
        widths = {block[d].shape[-1] for block in (self.h_t, self.h_s, self.h_v) for d in DOMAINS}
        if len(widths) != 1:
            raise DimensionError(f'representations disagree on dimension: {sorted(widths)}')

    @property
    def dim(self) -> int:
        return self.h_t[Domain.A].shape[-1]

    def select(self, users, items: dict = None) -> 'DisentangledBatch':
        """
        Gathers user rows (and per-domain item rows when `items` is given;
        otherwise the item reps are kept whole).
        """
        users = torch.as_tensor(users, dtype=torch.long)
        _check_range(users, self.h_t[Domain.A].shape[0], 'user')
        h_v = dict(self.h_v)
        if items is not None:
            h_v = {}
            for domain in DOMAINS:
                index = torch.as_tensor(items[domain], dtype=torch.long)
                _check_range(index, self.h_v[domain].shape[0], f'item ({domain.value})')
                h_v[domain] = self.h_v[domain][index]
        return DisentangledBatch(
            users=self.users[users],
            h_t={d: self.h_t[d][users] for d in DOMAINS},
            h_s={d: self.h_s[d][users] for d in DOMAINS},
            h_v=h_v,
        )


def _check_range(index: torch.Tensor, size: int, label: str):
    if index.numel() and (index.min() < 0 or index.max() >= size):
        raise IndexError(f'{label} index out of range [0, {size})')


def encode_full(network, graphs: dict) -> DisentangledBatch:
    """
    Runs propagation twice per domain: (U_t, V) gives h_t and the item reps
    h_v; (U_s, V) gives h_s and its item side is discarded.
    """
    h_t, h_s, h_v = {}, {}, {}
    for domain in DOMAINS:
        key = domain.value
        items = network.items[key].weight
        h_t[domain], h_v[domain] = propagate(network.user_t[key].weight, items, graphs[domain], network.layers)
        h_s[domain], _ = propagate(network.user_s[key].weight, items, graphs[domain], network.layers)
    users = torch.arange(h_t[Domain.A].shape[0])
    return DisentangledBatch(users=users, h_t=h_t, h_s=h_s, h_v=h_v)


def encode_all(network, graphs: dict, user_batch, item_batch: dict) -> DisentangledBatch:
    """Encodes the full graphs and gathers the requested user and item rows."""
    return encode_full(network, graphs).select(user_batch, item_batch)
