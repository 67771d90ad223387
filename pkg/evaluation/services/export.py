"""
Exports sampled disentangled user representations for external projection
tools, plus a JSON summary of their geometry.
"""
import itertools
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from config.core.exceptions import SamplingError
from config.core.serializer_utils import write_json
from interactions.services.types import Domain
from recsys.alignment import mmd
from recsys.encoders import encode_full
from .evaluator import candidate_matrix

logger = logging.getLogger(__name__)

DEFAULT_GROUPS = ('h_t_A', 'h_t_B', 'h_s_B')


def _group_block(representations, group: str) -> torch.Tensor:
    kind, domain = group.rsplit('_', 1)
    block = representations.h_t if kind == 'h_t' else representations.h_s
    return block[Domain(domain)]


def geometry_summary(blocks: dict) -> dict:
    """Pairwise centroid distances and pairwise MMD between the exported groups."""
    centroids = {name: block.mean(dim=0) for name, block in blocks.items()}
    pairs = []
    for left, right in itertools.combinations(blocks, 2):
        pairs.append({
            'groups': [left, right],
            'centroid_distance': float(torch.linalg.vector_norm(centroids[left] - centroids[right])),
            'mmd': float(mmd(blocks[left], blocks[right])),
        })
    return {'groups': {name: len(block) for name, block in blocks.items()}, 'pairs': pairs}


def export_representations(network, graphs, sample_size: int, seed: int, path, include_specific_a: bool = False) -> Path:
    """
    Samples `sample_size` users (without replacement, seeded) and writes one
    row per (group, user): group, user_index, dim_0 .. dim_{d-1}. The same
    users are used for every group. A `<stem>.geometry.json` summary is
    written next to the file.
    """
    path = Path(path)
    groups = DEFAULT_GROUPS + (('h_s_A',) if include_specific_a else ())
    with torch.no_grad():
        representations = encode_full(network, graphs)
    user_count = representations.h_t[Domain.A].shape[0]
    if sample_size > user_count:
        raise SamplingError(f'cannot sample {sample_size} users for export: only {user_count} available')

    users = np.sort(np.random.default_rng(seed).choice(user_count, size=sample_size, replace=False))
    index = torch.from_numpy(users)
    blocks = {group: _group_block(representations, group)[index].double() for group in groups}

    frames = []
    for group, block in blocks.items():
        frame = pd.DataFrame(block.numpy(), columns=[f'dim_{i}' for i in range(block.shape[1])])
        frame.insert(0, 'user_index', users)
        frame.insert(0, 'group', group)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, sep='\t', index=False, lineterminator='\n')

    write_json(path.with_suffix('.geometry.json'), geometry_summary(blocks))
    logger.info('Exported %d rows across %d groups to %s', sample_size * len(groups), len(groups), path)
    return path


def dump_attention(scorers: dict, candidates: dict, path, batch_users: int = 64, num_negatives: int = None) -> Path:
    """
    Writes the fusion weights of every held-out positive: domain, user_index,
    then the weights of (cross-domain h_t, own h_t, own h_s).
    """
    path = Path(path)
    frames = []
    for domain, scorer in scorers.items():
        if not candidates.get(domain):
            continue
        users, items = candidate_matrix(candidates[domain], num_negatives)
        weights = [
            scorer.attention_weights(domain, users[start:start + batch_users], items[start:start + batch_users, :1])[:, 0]
            for start in range(0, len(users), batch_users)
        ]
        frame = pd.DataFrame(np.concatenate(weights), columns=['w_cross', 'w_invariant', 'w_specific'])
        frame.insert(0, 'user_index', users)
        frame.insert(0, 'domain', domain.value)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ['domain', 'user_index', 'w_cross', 'w_invariant', 'w_specific']
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
    table.to_csv(path, sep='\t', index=False, lineterminator='\n')
    logger.info('Wrote attention weights of %d positives to %s', len(table), path)
    return path
