"""
SSIM anomaly map (SM)
---------------------

Per-pixel dissimilarity between a tile and its reconstruction.

INPUTS
 - x, y: H x W x C tiles in [0, 1] (input and reconstruction, order doesn't matter)
 - SsimParams: Gaussian window side and sigma, c1, c2, dynamic range

OUTPUTS
 - SM: H x W map in [0, 1], 0 = identical neighbourhoods

APPROACH
 1. Gaussian-weighted local means, variances and covariance per channel
    (reflect padding at the borders)
 2. Standard two-factor SSIM per pixel, averaged over channels
 3. SM = (1 - SSIM) / 2, clamped to [0, 1]
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import ndimage

from io_utils.errors import ShapeError


class SsimParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    window_side: int = 11
    gaussian_sigma: float = 1.5
    dynamic_range: float = 1.0
    c1: float | None = None
    c2: float | None = None

    @field_validator("window_side")
    @classmethod
    def _odd(cls, v):
        if v < 3 or v % 2 == 0:
            raise ValueError("window side must be odd and >= 3")
        return v

    @field_validator("gaussian_sigma", "dynamic_range")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @model_validator(mode="after")
    def _constants(self):
        # c1 = (0.01 L)^2, c2 = (0.03 L)^2 unless given
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.dynamic_range) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.dynamic_range) ** 2)
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be > 0")
        return self


def _as_hwc(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[..., None] if a.ndim == 2 else a


def ssim_index(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> np.ndarray:
    """Per-pixel SSIM averaged over channels (H x W)."""
    params = params or SsimParams()
    x, y = _as_hwc(x), _as_hwc(y)
    if x.shape != y.shape or x.ndim != 3:
        raise ShapeError(f"SSIM inputs must share an H x W x C shape, got {x.shape} and {y.shape}")

    radius = (params.window_side - 1) // 2

    def blur(a):
        return ndimage.gaussian_filter(a, sigma=params.gaussian_sigma, mode="reflect", radius=radius)

    c1, c2 = params.c1, params.c2
    per_channel = []
    for ch in range(x.shape[2]):
        xc, yc = x[..., ch], y[..., ch]
        mu_x, mu_y = blur(xc), blur(yc)
        var_x = blur(xc * xc) - mu_x * mu_x
        var_y = blur(yc * yc) - mu_y * mu_y
        cov = blur(xc * yc) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        per_channel.append(num / den)
    return np.mean(per_channel, axis=0)


def ssim_map(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> np.ndarray:
    return np.clip((1.0 - ssim_index(x, y, params)) / 2.0, 0.0, 1.0)
