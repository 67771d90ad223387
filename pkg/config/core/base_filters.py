from django_filters import IsoDateTimeFilter, NumberFilter
from django_filters.rest_framework import FilterSet


class _BoundedFilterSet(FilterSet):
    """
    Adds a `<field>_gte` / `<field>_lte` pair for every field returned by
    `_bound_specs`. A FilterSet that declares bounded fields must define a
    Meta.model; checked when the class is created so a misconfigured filter
    fails at import time instead of at query time.
    """
    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        declares_bounds = getattr(cls, 'range_fields', None) or getattr(cls, 'date_fields', None)
        if declares_bounds and not (hasattr(cls, 'Meta') and hasattr(cls.Meta, 'model')):
            raise TypeError(f"{cls.__name__} must define a Meta.model")

    @classmethod
    def _bound_specs(cls):
        return []

    @classmethod
    def get_filters(cls):
        filters = super().get_filters()
        for field, filter_class, (low_label, high_label) in cls._bound_specs():
            filters[f'{field}_gte'] = filter_class(field_name=field, lookup_expr='gte', label=low_label)
            filters[f'{field}_lte'] = filter_class(field_name=field, lookup_expr='lte', label=high_label)
        return filters


class BaseDateRangeFilterSet(_BoundedFilterSet):
    """
    A reusable base class for timestamp range filtering on the fields
    listed in 'date_fields'. Values are ISO-8601 dates or datetimes.
    """
    date_fields = []

    @classmethod
    def _bound_specs(cls):
        specs = super()._bound_specs()
        for field in cls.date_fields:
            label = field.replace('_', ' ').title()
            specs.append((field, IsoDateTimeFilter, (f'{label} From', f'{label} To')))
        return specs


class BaseRangeFilterSet(_BoundedFilterSet):
    """
    A reusable base class for numeric range filtering on the fields
    listed in 'range_fields' (metrics, counts, seeds).
    """
    range_fields = []

    @classmethod
    def _bound_specs(cls):
        specs = super()._bound_specs()
        for field in cls.range_fields:
            label = field.replace('_', ' ').title()
            specs.append((field, NumberFilter, (f'Min {label}', f'Max {label}')))
        return specs
