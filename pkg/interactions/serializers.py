from rest_framework import serializers

from .models import PreparedDataset


class StrengthField(serializers.FloatField):
    """A float restricted to the closed unit interval."""
    def __init__(self, **kwargs):
        kwargs.setdefault('min_value', 0.0)
        kwargs.setdefault('max_value', 1.0)
        super().__init__(**kwargs)


class SyntheticSpecSerializer(serializers.Serializer):
    user_count = serializers.IntegerField(min_value=2)
    item_counts = serializers.ListField(child=serializers.IntegerField(min_value=2), min_length=2, max_length=2)
    latent_dim = serializers.IntegerField(min_value=2)
    shared_strength = StrengthField()
    exclusive_strength = StrengthField()
    noise = serializers.FloatField(min_value=0.0)
    interactions_per_user = serializers.IntegerField(min_value=2)
    seed = serializers.IntegerField(min_value=0)

    def validate(self, attrs):
        smallest = min(attrs['item_counts'])
        if attrs['interactions_per_user'] >= smallest:
            raise serializers.ValidationError(
                {'interactions_per_user': f'Must be below the smallest item count ({smallest}).'}
            )
        return super().validate(attrs)


class DomainCountsField(serializers.DictField):
    """Per-domain integers keyed by domain tag ('A', 'B')."""
    def __init__(self, **kwargs):
        super().__init__(child=serializers.IntegerField(min_value=0), **kwargs)


class DatasetManifestSerializer(serializers.Serializer):
    """
    The manifest written next to a prepared dataset: counts, split sizes,
    seeds and the fingerprint of the emitted row files.
    """
    source = serializers.ChoiceField(choices=PreparedDataset.Source.choices)
    seed = serializers.IntegerField()
    user_count = serializers.IntegerField(min_value=1)
    item_counts = DomainCountsField()
    train_sizes = DomainCountsField()
    test_sizes = DomainCountsField()
    candidate_counts = DomainCountsField()
    skipped_candidates = DomainCountsField()
    num_negatives = serializers.IntegerField(min_value=1)
    files = serializers.ListField(child=serializers.CharField())
    fingerprint = serializers.CharField(max_length=64)
    synthetic_spec = serializers.DictField(required=False, allow_null=True)


class PreparedDatasetSerializer(serializers.ModelSerializer):
    class Meta:
        model = PreparedDataset
        fields = [
            'id', 'fingerprint', 'path', 'source', 'seed', 'user_count',
            'item_count_a', 'item_count_b', 'train_size_a', 'train_size_b',
            'test_size_a', 'test_size_b', 'num_negatives', 'created_at',
        ]
