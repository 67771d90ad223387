"""
Training configuration and ablation variants.

`TrainingConfig` is the frozen, already-validated form of a config; build it
through `training.serializers.TrainingConfigSerializer` when the values come
from a file or the command line.
"""
from dataclasses import asdict, dataclass, replace

from django.db import models

from config.core.hashing import config_hash
from recsys.alignment import DEFAULT_MULTIPLIERS, KernelConfig


class Ablation(models.TextChoices):
    FULL = 'full', 'Full model'
    INTER_ONLY = 'inter_only', 'Inter Only'
    INTRA_INTER = 'intra_inter', 'Intra and Inter'
    WO_TAFC = 'wo_tafc', 'wo TAFC'


@dataclass(frozen=True)
class AblationFlags:
    mutual_information: bool
    reconstruction: bool
    attention: bool


ABLATION_FLAGS = {
    Ablation.INTER_ONLY: AblationFlags(mutual_information=False, reconstruction=False, attention=False),
    Ablation.INTRA_INTER: AblationFlags(mutual_information=True, reconstruction=False, attention=False),
    Ablation.WO_TAFC: AblationFlags(mutual_information=True, reconstruction=True, attention=False),
    Ablation.FULL: AblationFlags(mutual_information=True, reconstruction=True, attention=True),
}


@dataclass(frozen=True)
class TrainingConfig:
    d: int = 128
    layers: int = 2
    learning_rate: float = 0.002
    batch_size: int = 1024
    epochs: int = 100
    alpha: float = 1.0
    beta_a: float = 1e-4
    beta_b: float = 9e-4
    gamma_a: float = 0.01
    gamma_b: float = 0.09
    club_inner_steps: int = 5
    grl_scale: float = 1.0
    symmetric_dcmmd: bool = True
    negative_ratio: int = 1
    ablation: str = Ablation.FULL.value
    seed: int = 0
    eval_every: int = 10
    top_k: int = 10
    num_negatives: int = None
    target_domain: str = 'B'
    kernel_multipliers: tuple = DEFAULT_MULTIPLIERS
    kernel_bandwidths: tuple = None
    projector_hidden: int = 64
    variational_hidden: int = None
    reconstructor_hidden: int = 256
    logvar_clamp: float = 10.0
    grad_clip: float = 10.0
    retrain_per_direction: bool = False
    eval_batch_users: int = 64

    def __post_init__(self):
        object.__setattr__(self, 'ablation', Ablation(self.ablation).value)
        object.__setattr__(self, 'kernel_multipliers', tuple(self.kernel_multipliers))
        if self.kernel_bandwidths is not None:
            object.__setattr__(self, 'kernel_bandwidths', tuple(self.kernel_bandwidths))
        weights = {name: getattr(self, name) for name in ('alpha', 'beta_a', 'beta_b', 'gamma_a', 'gamma_b')}
        negative = [name for name, value in weights.items() if value < 0]
        if negative:
            raise ValueError(f'loss weights must be >= 0: {", ".join(negative)}')
        if self.batch_size < 2:
            raise ValueError(f'batch_size must be >= 2, got {self.batch_size}')
        if self.epochs < 1:
            raise ValueError(f'epochs must be >= 1, got {self.epochs}')
        if self.eval_every < 1:
            raise ValueError(f'eval_every must be >= 1, got {self.eval_every}')
        if self.grl_scale <= 0:
            raise ValueError(f'grl_scale must be > 0, got {self.grl_scale}')

    @property
    def flags(self) -> AblationFlags:
        return ABLATION_FLAGS[Ablation(self.ablation)]

    @property
    def kernel(self) -> KernelConfig:
        return KernelConfig(multipliers=self.kernel_multipliers, bandwidths=self.kernel_bandwidths)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['kernel_multipliers'] = list(self.kernel_multipliers)
        if self.kernel_bandwidths is not None:
            data['kernel_bandwidths'] = list(self.kernel_bandwidths)
        return data

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def run_key(self) -> str:
        return f'{self.hash[:12]}-s{self.seed}'

    def replace(self, **changes) -> 'TrainingConfig':
        return replace(self, **changes)
