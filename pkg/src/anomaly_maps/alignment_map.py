"""
Alignment map (AM)
------------------

How badly each latent cell aligns with its codebook vector, brought up to
image scale.

INPUTS
 - Quantization of a tile (per-cell residuals ||z_e - e_k||)
 - AmNormalizer from calibration
 - downsample factor f and a disk radius for the dilation

OUTPUTS
 - latent-scale field a = r / scale (h x w)
 - image-scale AM (H x W)

APPROACH
 1. Divide residuals by the calibrated scale
 2. Nearest-neighbour upsample by f (each cell becomes an f x f block)
 3. Grey dilation with a disk of radius ceil(f / 2)
"""

import math

import numpy as np
from scipy import ndimage
from skimage.morphology import disk

from io_utils.errors import ConfigurationError


def alignment_field(q, norm) -> np.ndarray:
    residuals = np.asarray(q.residuals, dtype=np.float64)
    return residuals / float(norm.scale)


def default_selem_radius(factor: int) -> int:
    return math.ceil(factor / 2)


def upsample_am(am_latent: np.ndarray, factor: int, selem_radius: int | None = None) -> np.ndarray:
    if factor <= 0:
        raise ConfigurationError(f"upsampling factor must be > 0, got {factor}")
    if selem_radius is None:
        selem_radius = default_selem_radius(factor)
    if selem_radius < 0:
        raise ConfigurationError(f"structuring element radius must be >= 0, got {selem_radius}")

    am_latent = np.asarray(am_latent, dtype=np.float64)
    upsampled = np.repeat(np.repeat(am_latent, factor, axis=0), factor, axis=1)
    if selem_radius == 0:
        return upsampled
    # edge replication never adds a value the disk couldn't already reach
    return ndimage.grey_dilation(upsampled, footprint=disk(selem_radius).astype(bool), mode="nearest")
