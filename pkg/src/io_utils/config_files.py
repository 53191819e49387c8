"""
JSON config files (--params, --config, --settings).

A config the user points at is user input: a missing or malformed file is a
usage error (exit 2), unlike the artifacts the pipeline writes itself.
"""

import json
from pathlib import Path

from io_utils.errors import ConfigurationError


def read_config_file(path, what: str = "config") -> dict:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"{what} file not found: {path}")
    except IsADirectoryError:
        raise ConfigurationError(f"{what} path is a directory: {path}")
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"{what} file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{what} file {path} must hold a JSON object")
    return data


def write_json(data, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise ConfigurationError(f"cannot write {path}: {e}") from e
    return path


SEED_LIMIT = 2**64


def check_seed(v: int) -> int:
    """Seeds shared by torch, numpy and SeedSequence: unsigned 64-bit."""
    if not 0 <= v < SEED_LIMIT:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return v
