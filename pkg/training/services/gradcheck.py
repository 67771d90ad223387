"""
Finite-difference checks of every loss gradient on tiny float64 instances.

Each suite compares autograd gradients with central differences of the
forward value and reports the worst norm-wise relative error over its
inputs. Through the gradient reversal layer the expected analytic
gradient of the reversed inputs is -scale times the numeric one.
"""
import logging
from dataclasses import dataclass

import torch

from interactions.services.types import DOMAINS, Domain
from recsys.alignment import KernelConfig, ProjectorHead, dc_mmd_loss
from recsys.disentangle import Reconstructor, VariationalNet, club_mi_loss, reconstruction_loss
from recsys.encoders import DisentangledBatch, build_graph, propagate
from recsys.fusion import bce_loss, predict, tafc_fuse

logger = logging.getLogger(__name__)

EPSILON = 1e-6
DEFAULT_TOLERANCE = 1e-3


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    worst_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_error < self.tolerance


def numeric_gradient(function, tensor: torch.Tensor, eps: float = EPSILON) -> torch.Tensor:
    """Central differences of the scalar `function()` with respect to `tensor`, perturbed in place."""
    gradient = torch.zeros_like(tensor)
    flat, flat_gradient = tensor.data.view(-1), gradient.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            original = flat[i].item()
            flat[i] = original + eps
            upper = function().item()
            flat[i] = original - eps
            lower = function().item()
            flat[i] = original
            flat_gradient[i] = (upper - lower) / (2 * eps)
    return gradient


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    scale = max(analytic.norm().item(), numeric.norm().item(), 1e-12)
    return (analytic - numeric).norm().item() / scale


def check(name: str, function, inputs: dict, reversed_inputs: dict = None, tolerance: float = DEFAULT_TOLERANCE) -> GradcheckResult:
    """
    `inputs` maps labels to leaf tensors; `reversed_inputs` maps labels of
    inputs that pass through a gradient reversal to its scale.
    """
    reversed_inputs = reversed_inputs or {}
    tensors = list(inputs.values())
    analytic = torch.autograd.grad(function(), tensors)
    worst = 0.0
    for (label, tensor), gradient in zip(inputs.items(), analytic):
        expected = numeric_gradient(function, tensor)
        if label in reversed_inputs:
            expected = -reversed_inputs[label] * expected
        error = relative_error(gradient, expected)
        logger.debug('%s / %s: relative error %.3e', name, label, error)
        worst = max(worst, error)
    return GradcheckResult(name=name, worst_error=worst, tolerance=tolerance)


def _leaf(generator, *shape) -> torch.Tensor:
    return torch.randn(*shape, generator=generator, dtype=torch.float64).requires_grad_()


def _batch(generator, rows: int, dim: int) -> tuple[DisentangledBatch, dict]:
    leaves = {f'{kind}_{d.value}': _leaf(generator, rows, dim) for kind in ('h_t', 'h_s') for d in DOMAINS}
    batch = DisentangledBatch(
        users=torch.arange(rows),
        h_t={d: leaves[f'h_t_{d.value}'] for d in DOMAINS},
        h_s={d: leaves[f'h_s_{d.value}'] for d in DOMAINS},
        h_v={d: leaves[f'h_t_{d.value}'] for d in DOMAINS},
    )
    return batch, leaves


def check_propagation(seed: int = 0) -> GradcheckResult:
    generator = torch.Generator().manual_seed(seed)
    graph = build_graph(3, 4, [[0, 0], [0, 1], [1, 1], [1, 2], [2, 3], [2, 0]])
    users, items = _leaf(generator, 3, 8), _leaf(generator, 4, 8)
    weights_u, weights_v = torch.randn(3, 8, generator=generator, dtype=torch.float64), torch.randn(4, 8, generator=generator, dtype=torch.float64)

    def function():
        out_users, out_items = propagate(users, items, graph, 2)
        return (torch.tanh(out_users) * weights_u).sum() + (out_items ** 2 * weights_v).sum()

    return check('propagate', function, {'users': users, 'items': items}, tolerance=1e-4)


def check_dc_mmd(seed: int = 0, grl_scale: float = 1.0) -> GradcheckResult:
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    batch, leaves = _batch(generator, 8, 4)
    projectors = {d.value: ProjectorHead(4, 6).double() for d in DOMAINS}
    kernel = KernelConfig(bandwidths=(0.5, 1.0, 2.0, 4.0))

    def function():
        return dc_mmd_loss(batch, projectors, kernel, symmetric=True, grl_scale=grl_scale)

    reversed_inputs = {'h_s_A': grl_scale, 'h_s_B': grl_scale}
    return check(f'dc_mmd (reversal scale {grl_scale:g})', function, leaves, reversed_inputs)


class _FrozenBandwidths:
    """
    Wraps a kernel whose bandwidths come from the median heuristic. The first
    pass records every bandwidth vector in call order; later passes replay them,
    so central differences see the same fixed bandwidths autograd treats as
    constants.
    """
    def __init__(self, kernel: KernelConfig):
        self.kernel = kernel
        self.recorded = []
        self.replaying = False
        self._cursor = 0

    def sigmas(self, *squared_blocks: torch.Tensor) -> torch.Tensor:
        if not self.replaying:
            sigmas = self.kernel.sigmas(*squared_blocks)
            self.recorded.append(sigmas)
            return sigmas
        sigmas = self.recorded[self._cursor % len(self.recorded)]
        self._cursor += 1
        return sigmas

    def freeze(self):
        self.replaying = True
        self._cursor = 0


def check_dc_mmd_median(seed: int = 0, grl_scale: float = 1.0) -> GradcheckResult:
    """dc_mmd under the default median-heuristic kernel, bandwidths held at the base point."""
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    batch, leaves = _batch(generator, 8, 4)
    projectors = {d.value: ProjectorHead(4, 6).double() for d in DOMAINS}
    kernel = _FrozenBandwidths(KernelConfig())

    def function():
        return dc_mmd_loss(batch, projectors, kernel, symmetric=True, grl_scale=grl_scale)

    with torch.no_grad():
        function()
    kernel.freeze()
    reversed_inputs = {'h_s_A': grl_scale, 'h_s_B': grl_scale}
    return check('dc_mmd (median bandwidths)', function, leaves, reversed_inputs)


def check_club(seed: int = 0) -> GradcheckResult:
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    net = VariationalNet(4, hidden=8).double()
    h_t, h_s = _leaf(generator, 8, 4), _leaf(generator, 8, 4)
    permutation = torch.randperm(8, generator=generator)

    def function():
        return club_mi_loss(net, h_t, h_s, permutation=permutation)

    return check('club_mi', function, {'h_t': h_t, 'h_s': h_s})


def check_reconstruction(seed: int = 0) -> GradcheckResult:
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    batch, leaves = _batch(generator, 8, 4)
    reconstructors = {d.value: Reconstructor(4, 16).double() for d in DOMAINS}
    raw = {d: (torch.randn(8, 4, generator=generator, dtype=torch.float64),
               torch.randn(8, 4, generator=generator, dtype=torch.float64)) for d in DOMAINS}

    def function():
        return reconstruction_loss(reconstructors, batch, raw, 0.01, 0.09)

    return check('reconstruction', function, leaves)


def check_fusion(seed: int = 0) -> GradcheckResult:
    generator = torch.Generator().manual_seed(seed)
    h_v = _leaf(generator, 6, 4)
    reps = {name: _leaf(generator, 6, 4) for name in ('cross', 'invariant', 'specific')}
    labels = torch.tensor([1.0, 0.0, 1.0, 0.0, 0.0, 1.0], dtype=torch.float64)

    def function():
        fused = tafc_fuse(h_v, tuple(reps.values()))
        return bce_loss(predict(fused.e, h_v), labels)

    return check('tafc + cross-entropy', function, {'h_v': h_v, **reps})


def run_all(seed: int = 0) -> list:
    return [
        check_propagation(seed),
        check_dc_mmd(seed, grl_scale=1.0),
        check_dc_mmd(seed, grl_scale=0.5),
        check_dc_mmd_median(seed),
        check_club(seed),
        check_reconstruction(seed),
        check_fusion(seed),
    ]
