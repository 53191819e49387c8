"""
5) Hysteresis double thresholding
---------------------------------

Noisy-sea adaptation of the fused anomaly map: segmented AM pixels act as
markers that decide which segmented SM components survive. Glare and foam
light up SM but rarely AM, so their components are dropped.

INPUTS
 - sm, am: H x W maps
 - lambda_sm, lambda_am: segmentation thresholds (inclusive, value >= lambda)
 - connectivity: 4 or 8 (8 by default, small animals show up as diagonal chains)

OUTPUTS
 - Amap: H x W boolean mask, always a subset of the segmented SM

APPROACH
 1. Segment SM at lambda_sm
 2. Segment AM at lambda_am
 3. Label the connected components of the segmented SM
 4. Keep every component sharing at least one pixel with the segmented AM

select_amap also offers the "pixelwise" mode: threshold the product-fused map
at lambda_sm, with no marker step.
"""

import numpy as np

from anomaly_maps.fuse_maps import fuse_pixelwise
from hysteresis.components import binarize, label_components, structure_for
from io_utils.errors import ConfigurationError, ShapeError

FUSION_MODES = ("hysteresis", "pixelwise")


def hysteresis_select(sm, am, lambda_sm: float, lambda_am: float, connectivity: int = 8) -> np.ndarray:
    sm = np.asarray(sm)
    am = np.asarray(am)
    if sm.shape != am.shape:
        raise ShapeError(f"SM {sm.shape} and AM {am.shape} differ")
    structure_for(connectivity)

    sm_mask = binarize(sm, lambda_sm)
    am_mask = binarize(am, lambda_am)
    components = label_components(sm_mask, connectivity)
    if components.count == 0:
        return np.zeros(sm.shape, dtype=bool)

    marked = np.unique(components.labels[am_mask & sm_mask])
    marked = marked[marked > 0]
    return np.isin(components.labels, marked)


def select_amap(sm, am, lambda_sm: float, lambda_am: float, connectivity: int = 8, mode: str = "hysteresis") -> np.ndarray:
    if mode == "hysteresis":
        return hysteresis_select(sm, am, lambda_sm, lambda_am, connectivity)
    if mode == "pixelwise":
        return binarize(fuse_pixelwise(sm, am), lambda_sm)
    raise ConfigurationError(f"unknown fusion mode {mode!r}, expected one of {FUSION_MODES}")
