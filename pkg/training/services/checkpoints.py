"""
Checkpoint directories: one `.npy` array per named parameter, a manifest
with shapes, d, layer count and config hash, and the optimizer states.
"""
import json
import logging
import shutil
from pathlib import Path

import numpy as np
import torch

from config.core.exceptions import DataFormatError, DimensionError
from config.core.serializer_utils import write_json
from recsys.network import build_network
from training.serializers import CheckpointManifestSerializer

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
OPTIMIZER_NAME = 'optimizer.pt'


def save_checkpoint(network, directory, *, config_hash: str, epoch: int, optimizers: dict = None) -> Path:
    """
    Writes the network state under `directory`, replacing any previous
    checkpoint there.
    """
    directory = Path(directory)
    if directory.exists():
        shutil.rmtree(directory)
    directory.mkdir(parents=True)
    arrays = {}
    for name, tensor in network.state_dict().items():
        array = tensor.detach().cpu().numpy()
        np.save(directory / f'{name}.npy', array, allow_pickle=False)
        arrays[name] = list(array.shape)
    manifest = CheckpointManifestSerializer(data={
        'arrays': arrays,
        'd': network.dim,
        'layers': network.layers,
        'config_hash': config_hash,
        'epoch': epoch,
    })
    manifest.is_valid(raise_exception=True)
    write_json(directory / MANIFEST_NAME, manifest.validated_data)
    if optimizers:
        torch.save({name: optimizer.state_dict() for name, optimizer in optimizers.items()}, directory / OPTIMIZER_NAME)
    logger.debug('Saved checkpoint of epoch %d to %s', epoch, directory)
    return directory


def read_checkpoint_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise DataFormatError('checkpoint manifest is missing', path=path)
    manifest = CheckpointManifestSerializer(data=json.loads(path.read_text()))
    manifest.is_valid(raise_exception=True)
    return dict(manifest.validated_data)


def load_checkpoint(network, directory, optimizers: dict = None) -> dict:
    """
    Loads arrays into `network` (shapes must match exactly) and, when given,
    the optimizer states. Returns the checkpoint manifest.
    """
    directory = Path(directory)
    manifest = read_checkpoint_manifest(directory)
    if manifest['d'] != network.dim or manifest['layers'] != network.layers:
        raise DimensionError(
            f"checkpoint has d={manifest['d']}, layers={manifest['layers']}; "
            f'network has d={network.dim}, layers={network.layers}'
        )
    expected = network.state_dict()
    missing = sorted(set(expected) - set(manifest['arrays']))
    if missing:
        raise DataFormatError(f'checkpoint lacks arrays: {", ".join(missing)}', path=directory)
    state = {}
    for name, tensor in expected.items():
        array = np.load(directory / f'{name}.npy', allow_pickle=False)
        if tuple(array.shape) != tuple(tensor.shape):
            raise DimensionError(f'{name}: checkpoint shape {array.shape} != network shape {tuple(tensor.shape)}')
        state[name] = torch.from_numpy(array)
    network.load_state_dict(state)
    if optimizers and (directory / OPTIMIZER_NAME).exists():
        saved = torch.load(directory / OPTIMIZER_NAME, weights_only=True)
        for name, optimizer in optimizers.items():
            optimizer.load_state_dict(saved[name])
    return manifest


def restore_network(dataset, config, directory):
    """A network shaped for `dataset` and `config`, loaded from a checkpoint directory."""
    network = build_network(dataset, config)
    load_checkpoint(network, directory)
    return network
