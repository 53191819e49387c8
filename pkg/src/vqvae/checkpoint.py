"""
Checkpoint files
----------------

Binary container for a trained VQVAE.

LAYOUT
 - 8 bytes: magic b"VQAD0001"
 - 8 bytes: little-endian unsigned length of the JSON header
 - header: UTF-8 JSON {"format": 1, "config": ModelConfig, "tensors": [{name, shape, offset, nbytes}]}
 - payload: little-endian float32 tensors in directory order, offsets relative to payload start

Round trip is bit-exact.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
import torch

from io_utils.errors import ConfigurationError, CorruptArtifactError
from vqvae.vqvae_model import VQVAE, init_model, parse_model_config

logger = logging.getLogger(__name__)

MAGIC = b"VQAD0001"
FORMAT_VERSION = 1
_LEN = struct.Struct("<Q")


def checkpoint_bytes(state: VQVAE) -> bytes:
    directory = []
    payloads = []
    offset = 0
    for name, tensor in state.state_dict().items():
        arr = tensor.detach().cpu().numpy().astype("<f4", copy=False)
        raw = np.ascontiguousarray(arr).tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)

    header = {
        "format": FORMAT_VERSION,
        "config": state.config.model_dump(),
        "tensors": directory,
    }
    header_raw = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + _LEN.pack(len(header_raw)) + header_raw + b"".join(payloads)


def save_checkpoint(state: VQVAE, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(state))
    logger.info(f"wrote checkpoint {path}")
    return path


def _tensor_directory(entries, path) -> list:
    """The header's tensor list, each entry {name: str, shape: [int], offset: int, nbytes: int}."""
    if not isinstance(entries, list):
        raise CorruptArtifactError(f"{path}: tensor directory is not a list")
    for entry in entries:
        if not isinstance(entry, dict):
            raise CorruptArtifactError(f"{path}: tensor directory entry {entry!r} is not an object")
        ok = (
            isinstance(entry.get("name"), str)
            and isinstance(entry.get("shape"), list)
            and all(type(d) is int and d >= 0 for d in entry["shape"])
            and type(entry.get("offset")) is int
            and type(entry.get("nbytes")) is int
        )
        if not ok:
            raise CorruptArtifactError(f"{path}: malformed tensor directory entry {entry!r}")
    return entries


def load_checkpoint(path) -> VQVAE:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigurationError(f"checkpoint not found: {path}")

    if raw[:len(MAGIC)] != MAGIC:
        raise CorruptArtifactError(f"{path} is not a VQAD checkpoint (bad magic)")
    start = len(MAGIC)
    if len(raw) < start + _LEN.size:
        raise CorruptArtifactError(f"{path}: truncated header length")
    (header_len,) = _LEN.unpack_from(raw, start)
    start += _LEN.size
    if len(raw) < start + header_len:
        raise CorruptArtifactError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptArtifactError(f"{path}: unreadable header ({e})")
    if not isinstance(header, dict):
        raise CorruptArtifactError(f"{path}: header is not a JSON object")
    payload = memoryview(raw)[start + header_len:]

    if header.get("format") != FORMAT_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
    try:
        config = parse_model_config(header["config"])
    except (KeyError, ConfigurationError) as e:
        raise CorruptArtifactError(f"{path}: bad model config in header ({e})")

    state = init_model(config)
    expected = state.state_dict()
    entries = _tensor_directory(header.get("tensors"), path)
    if sorted(e["name"] for e in entries) != sorted(expected):
        raise CorruptArtifactError(f"{path}: tensor directory does not match the model layout")

    loaded = {}
    for entry in entries:
        name, shape = entry["name"], tuple(entry["shape"])
        off, nbytes = entry["offset"], entry["nbytes"]
        if shape != tuple(expected[name].shape):
            raise CorruptArtifactError(f"{path}: tensor {name} has shape {shape}, expected {tuple(expected[name].shape)}")
        if nbytes != 4 * int(np.prod(shape, dtype=np.int64)) or off < 0 or off + nbytes > len(payload):
            raise CorruptArtifactError(f"{path}: tensor {name} payload out of range")
        arr = np.frombuffer(payload[off:off + nbytes], dtype="<f4").reshape(shape)
        loaded[name] = torch.from_numpy(arr.astype(np.float32))

    state.load_state_dict(loaded)
    state.eval()
    return state
