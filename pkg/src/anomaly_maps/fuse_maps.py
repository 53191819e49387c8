"""
4) Anomaly maps for a tile
--------------------------

Runs the model on a tile and produces both anomaly evidences, plus the
pixelwise fused map used when no hysteresis is applied.

INPUTS
 - trained VQVAE, AmNormalizer, SsimParams, dilation radius
 - one H x W x C tile (or a batch)

OUTPUTS
 - reconstruction, Quantization, AnomalyMaps(sm, am) at image resolution

APPROACH
 1. reconstruct (encode -> quantize -> decode)
 2. SM = ssim_map(tile, reconstruction)
 3. AM = upsample_am(alignment_field(quantization), f, radius)
 4. fuse_pixelwise: min-max normalise both maps, multiply
"""

from dataclasses import dataclass

import numpy as np

from anomaly_maps.alignment_map import alignment_field, upsample_am
from anomaly_maps.ssim_map import SsimParams, ssim_map
from io_utils.errors import ShapeError
from vqvae.vqvae_model import reconstruct_batch


@dataclass
class AnomalyMaps:
    sm: np.ndarray
    am: np.ndarray


def _minmax(a: np.ndarray) -> np.ndarray:
    lo, hi = float(a.min()), float(a.max())
    if hi <= lo:
        return np.zeros_like(a, dtype=np.float64)
    return (a - lo) / (hi - lo)


def fuse_pixelwise(sm: np.ndarray, am: np.ndarray) -> np.ndarray:
    sm = np.asarray(sm, dtype=np.float64)
    am = np.asarray(am, dtype=np.float64)
    if sm.shape != am.shape:
        raise ShapeError(f"SM {sm.shape} and AM {am.shape} differ")
    return _minmax(sm) * _minmax(am)


def compute_anomaly_maps_batch(state, tiles, normalizer, ssim_params: SsimParams | None = None, selem_radius=None):
    """Returns a list of (reconstruction, Quantization, AnomalyMaps), one per tile."""
    tiles = np.asarray(tiles, dtype=np.float32)
    recons, quants = reconstruct_batch(state, tiles)
    f = state.config.downsample_factor
    out = []
    for tile, recon, q in zip(tiles, recons, quants):
        sm = ssim_map(tile, recon, ssim_params)
        am = upsample_am(alignment_field(q, normalizer), f, selem_radius)
        out.append((recon, q, AnomalyMaps(sm=sm, am=am)))
    return out


def compute_anomaly_maps(state, tile, normalizer, ssim_params: SsimParams | None = None, selem_radius=None):
    tile = np.asarray(tile)
    if tile.ndim != 3:
        raise ShapeError(f"expected an H x W x C tile, got shape {tile.shape}")
    return compute_anomaly_maps_batch(state, tile[None], normalizer, ssim_params, selem_radius)[0]
