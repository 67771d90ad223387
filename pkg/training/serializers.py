from rest_framework import serializers

from interactions.services.types import DOMAINS
from recsys.alignment import DEFAULT_MULTIPLIERS
from .config import Ablation, TrainingConfig
from .models import EvaluationRecord, TrainingRun

DOMAIN_CHOICES = [domain.value for domain in DOMAINS]
WEIGHT = {'min_value': 0.0}


class TrainingConfigSerializer(serializers.Serializer):
    """
    Validates TrainingConfig fields from a JSON file and/or CLI flags.
    Unknown keys are rejected so that a typo never silently falls back to a default.
    """
    d = serializers.IntegerField(min_value=1, default=128)
    layers = serializers.IntegerField(min_value=0, default=2)
    learning_rate = serializers.FloatField(min_value=0.0, default=0.002)
    batch_size = serializers.IntegerField(min_value=2, default=1024)
    epochs = serializers.IntegerField(min_value=1, default=100)
    alpha = serializers.FloatField(default=1.0, **WEIGHT)
    beta_a = serializers.FloatField(default=1e-4, **WEIGHT)
    beta_b = serializers.FloatField(default=9e-4, **WEIGHT)
    gamma_a = serializers.FloatField(default=0.01, **WEIGHT)
    gamma_b = serializers.FloatField(default=0.09, **WEIGHT)
    club_inner_steps = serializers.IntegerField(min_value=0, default=5)
    grl_scale = serializers.FloatField(min_value=0.0, default=1.0)
    symmetric_dcmmd = serializers.BooleanField(default=True)
    negative_ratio = serializers.IntegerField(min_value=1, default=1)
    ablation = serializers.ChoiceField(choices=Ablation.choices, default=Ablation.FULL.value)
    seed = serializers.IntegerField(min_value=0, default=0)
    eval_every = serializers.IntegerField(min_value=1, default=10)
    top_k = serializers.IntegerField(min_value=1, default=10)
    num_negatives = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    target_domain = serializers.ChoiceField(choices=DOMAIN_CHOICES, default='B')
    kernel_multipliers = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), min_length=1, default=lambda: list(DEFAULT_MULTIPLIERS)
    )
    kernel_bandwidths = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), min_length=1, allow_null=True, default=None
    )
    projector_hidden = serializers.IntegerField(min_value=1, default=64)
    variational_hidden = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    reconstructor_hidden = serializers.IntegerField(min_value=1, default=256)
    logvar_clamp = serializers.FloatField(min_value=0.0, default=10.0)
    grad_clip = serializers.FloatField(min_value=0.0, default=10.0)
    retrain_per_direction = serializers.BooleanField(default=False)
    eval_batch_users = serializers.IntegerField(min_value=1, default=64)

    def validate(self, attrs):
        unknown = sorted(set(self.initial_data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({name: 'Unknown config field.' for name in unknown})
        if attrs.get('grl_scale', 1.0) <= 0:
            raise serializers.ValidationError({'grl_scale': 'Must be strictly positive.'})
        for name in ('kernel_multipliers', 'kernel_bandwidths'):
            if attrs.get(name) and any(value <= 0 for value in attrs[name]):
                raise serializers.ValidationError({name: 'All values must be strictly positive.'})
        return super().validate(attrs)

    def to_config(self) -> TrainingConfig:
        return TrainingConfig(**self.validated_data)


class RunManifestSerializer(serializers.Serializer):
    """manifest.json of a run directory."""
    run_key = serializers.CharField()
    command = serializers.CharField()
    config = serializers.DictField()
    config_hash = serializers.CharField(max_length=64)
    dataset_fingerprint = serializers.CharField(max_length=64)
    seed = serializers.IntegerField()
    started_at = serializers.DateTimeField()
    finished_at = serializers.DateTimeField(allow_null=True)
    status = serializers.ChoiceField(choices=TrainingRun.Status.choices)
    artifacts = serializers.ListField(child=serializers.CharField())


class CheckpointManifestSerializer(serializers.Serializer):
    arrays = serializers.DictField(child=serializers.ListField(child=serializers.IntegerField(min_value=0)))
    d = serializers.IntegerField(min_value=1)
    layers = serializers.IntegerField(min_value=0)
    config_hash = serializers.CharField(max_length=64)
    epoch = serializers.IntegerField(min_value=0)


class EvaluationRecordSerializer(serializers.ModelSerializer):
    class Meta:
        model = EvaluationRecord
        fields = ['epoch', 'domain', 'hr', 'ndcg', 'users']


class TrainingRunSerializer(serializers.ModelSerializer):
    dataset = serializers.SlugRelatedField(slug_field='fingerprint', read_only=True)
    evaluations = EvaluationRecordSerializer(many=True, read_only=True)

    class Meta:
        model = TrainingRun
        fields = [
            'run_key', 'command', 'ablation', 'seed', 'config_hash', 'dataset', 'run_dir', 'status',
            'target_domain', 'started_at', 'finished_at', 'best_epoch', 'best_hr', 'best_ndcg', 'evaluations',
        ]
