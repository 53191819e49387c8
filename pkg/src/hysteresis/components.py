"""
Binary masks and connected components.

Component ids run 1..count in raster order of each component's first pixel,
0 is background.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from io_utils.errors import ConfigurationError

CONNECTIVITIES = (4, 8)


@dataclass
class ComponentSet:
    labels: np.ndarray
    count: int
    # per component (index id - 1): (rows, cols) pixel coordinates and (y0, x0, y1, x1) exclusive bounds
    pixels: list = field(default_factory=list)
    bounds: list = field(default_factory=list)

    def areas(self) -> np.ndarray:
        return np.array([len(rows) for rows, _ in self.pixels], dtype=np.int64)


def binarize(values: np.ndarray, threshold: float) -> np.ndarray:
    """True where value >= threshold."""
    return np.asarray(values) >= threshold


def structure_for(connectivity: int) -> np.ndarray:
    if connectivity not in CONNECTIVITIES:
        raise ConfigurationError(f"connectivity must be 4 or 8, got {connectivity}")
    return ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)


def _raster_relabel(labels: np.ndarray, count: int) -> np.ndarray:
    if count == 0:
        return labels
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids > 0
    ids, first = ids[keep], first[keep]
    remap = np.zeros(count + 1, dtype=labels.dtype)
    remap[ids[np.argsort(first, kind="stable")]] = np.arange(1, len(ids) + 1, dtype=labels.dtype)
    return remap[labels]


def label_components(mask: np.ndarray, connectivity: int = 8) -> ComponentSet:
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=structure_for(connectivity))
    labels = _raster_relabel(labels, count)

    pixels, bounds = [], []
    if count:
        order = np.argsort(labels.ravel(), kind="stable")
        sorted_ids = labels.ravel()[order]
        splits = np.searchsorted(sorted_ids, np.arange(1, count + 2))
        rows_all, cols_all = np.unravel_index(order, labels.shape)
        for i in range(count):
            lo, hi = splits[i], splits[i + 1]
            pixels.append((rows_all[lo:hi], cols_all[lo:hi]))
        for sl in ndimage.find_objects(labels, max_label=count):
            bounds.append((sl[0].start, sl[1].start, sl[0].stop, sl[1].stop))
    return ComponentSet(labels=labels, count=int(count), pixels=pixels, bounds=bounds)
