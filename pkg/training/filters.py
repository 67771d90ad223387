import django_filters

from config.core.base_filters import BaseDateRangeFilterSet, BaseRangeFilterSet
from .config import Ablation
from .models import TrainingRun


class TrainingRunFilter(BaseRangeFilterSet, BaseDateRangeFilterSet):
    """
    Filters the run registry by variant, seed, status and target domain,
    with ranges on the best target-domain metrics and on the start time.
    """
    range_fields = ['best_hr', 'best_ndcg', 'seed']
    date_fields = ['started_at']
    ablation = django_filters.ChoiceFilter(choices=Ablation.choices)
    config_hash = django_filters.CharFilter(lookup_expr='startswith', label='Config hash prefix')
    dataset = django_filters.CharFilter(field_name='dataset__fingerprint', lookup_expr='startswith',
                                        label='Dataset fingerprint prefix')

    class Meta:
        model = TrainingRun
        fields = ['status', 'target_domain', 'command']
