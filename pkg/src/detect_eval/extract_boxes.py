"""
Binary anomaly map -> detection boxes.

One box per connected component with area >= min_area: the tight bounding
rectangle, scored by the mean SM over the component's pixels.
"""

from dataclasses import dataclass

import numpy as np
from dataclasses_json import dataclass_json

from hysteresis.components import label_components
from io_utils.errors import ShapeError

DEFAULT_MIN_AREA = 4


@dataclass_json
@dataclass(frozen=True)
class DetectionBox:
    x: int
    y: int
    w: int
    h: int
    score: float = 0.0

    def key(self):
        return (self.x, self.y, self.w, self.h)


def extract_boxes(amap: np.ndarray, sm: np.ndarray, min_area: int = DEFAULT_MIN_AREA, connectivity: int = 8) -> list:
    amap = np.asarray(amap, dtype=bool)
    sm = np.asarray(sm, dtype=np.float64)
    if amap.shape != sm.shape:
        raise ShapeError(f"Amap {amap.shape} and SM {sm.shape} differ")

    components = label_components(amap, connectivity)
    boxes = []
    for (rows, cols), (y0, x0, y1, x1) in zip(components.pixels, components.bounds):
        if len(rows) < min_area:
            continue
        boxes.append(DetectionBox(
            x=int(x0), y=int(y0), w=int(x1 - x0), h=int(y1 - y0),
            score=float(sm[rows, cols].mean()),
        ))
    return boxes
