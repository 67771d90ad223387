import hashlib
import json
from pathlib import Path


def canonical_json(data) -> str:
    """
    Serializes plain data with sorted keys and no whitespace so that equal
    configs always hash to the same digest.
    """
    return json.dumps(data, sort_keys=True, separators=(',', ':'), default=str)


def config_hash(config_data: dict, exclude=('seed',)) -> str:
    """
    SHA-256 of the canonical config, ignoring the fields in `exclude`.
    The seed is excluded by default: run directories carry it separately.
    """
    payload = {k: v for k, v in config_data.items() if k not in exclude}
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def files_fingerprint(directory, names) -> str:
    """
    Digest over the named files of a directory, in sorted name order.
    File names are part of the digest so renames are detected.
    """
    digest = hashlib.sha256()
    directory = Path(directory)
    for name in sorted(names):
        digest.update(name.encode())
        digest.update((directory / name).read_bytes())
    return digest.hexdigest()
