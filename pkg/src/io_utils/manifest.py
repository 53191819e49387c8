"""
Dataset manifest: which tile files exist, their split, and their ground truth.

manifest.json
{
    "records": [
        {"boxes": [], "path": "tiles/train/train_00000.png", "split": "train"},
        {"boxes": [{"h": 7, "w": 9, "x": 12, "y": 40}], "path": "tiles/test/test_00001.png", "split": "test"},
        ...
    ]
}

Paths are relative to the manifest's directory. Train records must carry no
boxes (normal-only training), which check_train_split enforces.
"""

import json
import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from io_utils.errors import ConfigurationError, CorruptArtifactError, DataContractError, DataError, validation_message
from io_utils.png_export import load_tile_png

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


class Box(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    x: int
    y: int
    w: int
    h: int

    @field_validator("x", "y")
    @classmethod
    def _origin(cls, v):
        if v < 0:
            raise ValueError("box origin must be >= 0")
        return v

    @field_validator("w", "h")
    @classmethod
    def _extent(cls, v):
        if v < 1:
            raise ValueError("box extent must be >= 1")
        return v


class ManifestRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str
    split: Literal["train", "val", "test"]
    boxes: list[Box] = Field(default_factory=list)


class Manifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    records: list[ManifestRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_paths(self):
        seen = set()
        for r in self.records:
            if r.path in seen:
                raise ValueError(f"duplicate path {r.path}")
            seen.add(r.path)
        return self

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ConfigurationError(f"unknown split {name!r}, expected one of {SPLITS}")
        return [r for r in self.records if r.split == name]

    def by_path(self) -> dict:
        return {r.path: r for r in self.records}


def manifest_json(manifest: Manifest) -> str:
    return json.dumps(manifest.model_dump(), indent=4, sort_keys=True) + "\n"


def save_manifest(manifest: Manifest, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(manifest_json(manifest))
    except OSError as e:
        raise ConfigurationError(f"cannot write manifest {path}: {e}") from e
    return path


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"manifest not found: {path}")
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptArtifactError(f"{path}: not a JSON manifest ({e})")
    try:
        return Manifest.model_validate(data)
    except ValidationError as e:
        raise CorruptArtifactError(f"{path}: invalid manifest ({validation_message(e)})") from e


def check_train_split(manifest: Manifest):
    """The train split is normal-only: any record with boxes breaks the contract."""
    bad = [r.path for r in manifest.split("train") if r.boxes]
    if bad:
        raise DataContractError(f"{len(bad)} train record(s) carry anomaly boxes, first: {bad[0]}")


def check_boxes_in_bounds(record: ManifestRecord, height: int, width: int):
    for b in record.boxes:
        if b.x + b.w > width or b.y + b.h > height:
            raise DataContractError(f"{record.path}: box {b.model_dump()} exceeds the {width}x{height} image")


def load_tiles(manifest: Manifest, root, split: str):
    """
    Read every tile of a split into (N, H, W, 3) float32 in [0, 1].
    Returns (tiles, records) with records in manifest order.
    """
    root = Path(root)
    records = manifest.split(split)
    if not records:
        raise DataError(f"split {split!r} is empty")

    tiles = []
    for r in records:
        tile = load_tile_png(root / r.path)
        check_boxes_in_bounds(r, tile.shape[0], tile.shape[1])
        tiles.append(tile)
    shapes = {t.shape for t in tiles}
    if len(shapes) > 1:
        raise DataError(f"split {split!r} mixes tile shapes {sorted(shapes)}")
    logger.info(f"loaded {len(tiles)} {split} tiles from {root}")
    return np.stack(tiles), records
