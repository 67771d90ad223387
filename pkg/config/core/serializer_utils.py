from pathlib import Path

from rest_framework.renderers import JSONRenderer


def flatten_errors(detail, field=None) -> str:
    """
    Turns a (possibly nested) DRF error detail into a single line that names
    each offending field, e.g. "beta_a: Ensure this value is greater than or equal to 0."
    """
    if isinstance(detail, dict):
        return '; '.join(
            flatten_errors(value, field=key if field is None else f'{field}.{key}')
            for key, value in detail.items()
        )
    if isinstance(detail, (list, tuple)):
        text = ' '.join(str(item) for item in detail)
    else:
        text = str(detail)
    if field in (None, 'non_field_errors'):
        return text
    return f'{field}: {text}'


def render_json(data) -> bytes:
    """
    Renders serializer output the same way the API layer would,
    indented for reading in a terminal or diff.
    """
    return JSONRenderer().render(data, renderer_context={'indent': 2})


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render_json(data) + b'\n')
    return path
