"""
Builds a TrainingConfig from a JSON file plus command-line overrides.

Every serializer field except `seed` (a global flag) becomes a
`--field-name` option; options left unset do not override the file.
"""
import json
from pathlib import Path

from rest_framework import serializers

from config.core.exceptions import DataFormatError
from training.config import TrainingConfig
from training.serializers import TrainingConfigSerializer

GLOBAL_FIELDS = {'seed'}


def _float_list(text: str) -> list:
    return [float(value) for value in text.split(',') if value.strip()]


def _argument_type(field):
    if isinstance(field, serializers.ListField):
        return _float_list
    if isinstance(field, serializers.BooleanField):
        return str
    if isinstance(field, serializers.IntegerField):
        return int
    if isinstance(field, serializers.FloatField):
        return float
    return str


def add_config_arguments(parser):
    group = parser.add_argument_group('training config')
    for name, field in TrainingConfigSerializer().fields.items():
        if name in GLOBAL_FIELDS:
            continue
        kwargs = {'dest': name, 'default': None, 'type': _argument_type(field), 'metavar': name.upper()}
        if isinstance(field, serializers.ChoiceField):
            kwargs['choices'] = list(field.choices)
        default = field.default() if callable(field.default) else field.default
        kwargs['help'] = f'default: {default}'
        group.add_argument(f"--{name.replace('_', '-')}", **kwargs)


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataFormatError('config file not found', path=path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f'invalid JSON: {exc.msg}', path=path, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise DataFormatError('config must be a JSON object', path=path)
    return data


def load_training_config(path=None, overrides: dict = None) -> TrainingConfig:
    """
    File values first, then every non-None override. Raises DRF's
    ValidationError naming the offending fields.
    """
    data = read_config_file(path) if path else {}
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    serializer = TrainingConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.to_config()


def config_overrides(options: dict) -> dict:
    """Picks the config fields out of parsed command options."""
    names = set(TrainingConfigSerializer().fields)
    return {name: options.get(name) for name in names if options.get(name) is not None}
