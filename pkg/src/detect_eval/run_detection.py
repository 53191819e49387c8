"""
6) Run the detection pipeline over tiles
----------------------------------------

The whole detection chain for a set of tiles: both anomaly maps, thresholding
and fusion into the binary anomaly map, then boxes.

INPUTS
 - trained VQVAE + AmNormalizer (from the checkpoint and its sidecar)
 - tiles (N x H x W x C, values in [0, 1])
 - DetectionSettings: lambda_sm, lambda_am, connectivity, min_area,
   selem_radius, fusion mode, SSIM params

OUTPUTS
 - one TileDetection per tile, in input order (reconstruction, maps, Amap, boxes)

APPROACH
 1. Batched reconstruction + SM / AM (compute_anomaly_maps_batch)
 2. select_amap with the configured fusion mode
 3. extract_boxes on the Amap, scored by the SM
Steps 2 and 3 run on the worker pool; results keep the input order.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from anomaly_maps.fuse_maps import AnomalyMaps, compute_anomaly_maps_batch
from anomaly_maps.ssim_map import SsimParams
from detect_eval.extract_boxes import DEFAULT_MIN_AREA, extract_boxes
from hysteresis.components import CONNECTIVITIES
from hysteresis.double_threshold import select_amap
from io_utils.errors import ConfigurationError, ShapeError, validation_message
from io_utils.logging_setup import progress_disabled
from io_utils.workers import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_BATCH = 32


class DetectionSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_sm: float = 0.5
    lambda_am: float = 0.5
    connectivity: int = 8
    min_area: int = DEFAULT_MIN_AREA
    selem_radius: int | None = None
    fusion_mode: Literal["hysteresis", "pixelwise"] = "hysteresis"
    ssim: SsimParams = Field(default_factory=SsimParams)

    @field_validator("connectivity")
    @classmethod
    def _connectivity(cls, v):
        if v not in CONNECTIVITIES:
            raise ValueError("connectivity must be 4 or 8")
        return v

    @field_validator("min_area")
    @classmethod
    def _min_area(cls, v):
        if v < 1:
            raise ValueError("min_area must be >= 1")
        return v

    @field_validator("selem_radius")
    @classmethod
    def _radius(cls, v):
        if v is not None and v < 0:
            raise ValueError("selem radius must be >= 0")
        return v


def detection_settings(**overrides) -> DetectionSettings:
    """Build settings from keyword overrides, None meaning 'keep the default'."""
    values = {k: v for k, v in overrides.items() if v is not None}
    try:
        return DetectionSettings.model_validate(values)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid detection settings: {validation_message(e)}") from e
        raise


@dataclass
class TileDetection:
    reconstruction: np.ndarray
    maps: AnomalyMaps
    amap: np.ndarray
    boxes: list


def threshold_maps(maps: AnomalyMaps, settings: DetectionSettings, lambda_sm=None, lambda_am=None):
    """Amap and boxes for precomputed maps; the lambdas default to the settings' values."""
    lambda_sm = settings.lambda_sm if lambda_sm is None else lambda_sm
    lambda_am = settings.lambda_am if lambda_am is None else lambda_am
    amap = select_amap(maps.sm, maps.am, lambda_sm, lambda_am, settings.connectivity, settings.fusion_mode)
    boxes = extract_boxes(amap, maps.sm, settings.min_area, settings.connectivity)
    return amap, boxes


def compute_maps(state, normalizer, tiles, settings: DetectionSettings, batch_size: int = DEFAULT_BATCH):
    """(reconstruction, AnomalyMaps) per tile, in input order."""
    tiles = np.asarray(tiles, dtype=np.float32)
    if tiles.ndim != 4:
        raise ShapeError(f"expected N x H x W x C tiles, got shape {tiles.shape}")

    out = []
    starts = range(0, len(tiles), batch_size)
    for start in tqdm(starts, desc="Anomaly maps", unit="batch", disable=progress_disabled()):
        batch = compute_anomaly_maps_batch(
            state, tiles[start:start + batch_size], normalizer, settings.ssim, settings.selem_radius
        )
        out.extend((recon, maps) for recon, _, maps in batch)
    return out


def detect_records(state, normalizer, tiles, settings: DetectionSettings, batch_size: int = DEFAULT_BATCH) -> list:
    computed = compute_maps(state, normalizer, tiles, settings, batch_size)

    def _finish(item):
        recon, maps = item
        amap, boxes = threshold_maps(maps, settings)
        return TileDetection(reconstruction=recon, maps=maps, amap=amap, boxes=boxes)

    results = ordered_map(_finish, computed)
    logger.info(f"{sum(len(r.boxes) for r in results)} boxes over {len(results)} tiles "
                f"(lambda_sm={settings.lambda_sm}, lambda_am={settings.lambda_am}, {settings.fusion_mode})")
    return results


def detect_tile(state, normalizer, tile, settings: DetectionSettings) -> TileDetection:
    tile = np.asarray(tile)
    if tile.ndim != 3:
        raise ShapeError(f"expected an H x W x C tile, got shape {tile.shape}")
    return detect_records(state, normalizer, tile[None], settings, batch_size=1)[0]
