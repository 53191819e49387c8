"""
1) Synthetic aerial sea-surface tiles
-------------------------------------

Desk-scale stand-in for aerial marine survey imagery: empty sea tiles for
training, and tiles with animal-like blobs (plus exact boxes) for validation
and test. Sun glare and foam are the two nuisances that make naive fusion
fail, so both are part of "normal".

INPUTS
 - SceneParams (tile size, texture scale, nuisance and animal settings, seed)
 - tile index and split

OUTPUTS
 - SceneSample: H x W x 3 tile in [0, 1], ground-truth boxes (x, y, w, h),
   the per-blob blend masks, and whether glare / foam were drawn

APPROACH
 1. Every tile gets its own generators from SeedSequence([seed, split, index, stream]):
    stream 0 draws the background, stream 1 draws the animals, so an
    animal-free render of the same tile is pixel-identical to gen_normal
 2. Background = two octaves of value noise around a sea colour
 3. Animals = soft-edged ellipses, randomly oriented, added at animal_contrast
    (a deep_fraction of them at deep_contrast_scale * contrast), placed without
    overlapping by rejection sampling
 4. With glare_prob: a Gaussian-profile streak peaking at glare_strength
 5. With foam_prob: bright speckle clustered around a random centre
 6. Clamp to [0, 1]
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from io_utils.config_files import check_seed
from io_utils.errors import ConfigurationError, validation_message

logger = logging.getLogger(__name__)

SPLIT_CODES = {"train": 0, "val": 1, "test": 2}
BACKGROUND_STREAM = 0
ANIMAL_STREAM = 1
MAX_PLACEMENT_RETRIES = 100

# mean sea colour (RGB) and the swing of the wave texture around it
SEA_RGB = np.array([0.12, 0.32, 0.42])
WAVE_AMPLITUDE = 0.2


class SceneParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    tile_side: int = 64
    wave_scale: float = 16.0
    glare_prob: float = 0.15
    foam_prob: float = 0.25
    glare_strength: float = 1.3
    foam_density: float = 0.08
    animal_count_range: tuple[int, int] = (1, 3)
    animal_size_range: tuple[int, int] = (5, 11)
    animal_contrast: float = 0.4
    animal_softness: float = 0.2
    deep_fraction: float = 0.3
    deep_contrast_scale: float = 0.5
    seed: int = 0

    @field_validator("tile_side")
    @classmethod
    def _side(cls, v):
        if v < 8:
            raise ValueError("tile_side must be >= 8")
        return v

    @field_validator("wave_scale")
    @classmethod
    def _wave(cls, v):
        if not v > 0:
            raise ValueError("wave_scale must be > 0")
        return v

    @field_validator("glare_prob", "foam_prob", "foam_density", "deep_fraction", "deep_contrast_scale")
    @classmethod
    def _unit(cls, v):
        if not 0 <= v <= 1:
            raise ValueError("must be in [0, 1]")
        return v

    @field_validator("glare_strength")
    @classmethod
    def _strength(cls, v):
        if v < 0:
            raise ValueError("glare_strength must be >= 0")
        return v

    @field_validator("animal_softness")
    @classmethod
    def _softness(cls, v):
        if not 0 <= v < 1:
            raise ValueError("animal_softness must be in [0, 1)")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        return check_seed(v)

    @model_validator(mode="after")
    def _ranges(self):
        lo, hi = self.animal_count_range
        if not 1 <= lo <= hi:
            raise ValueError("animal_count_range must satisfy 1 <= min <= max")
        lo, hi = self.animal_size_range
        if not 0 < lo <= hi <= self.tile_side / 2:
            raise ValueError("animal_size_range must satisfy 0 < min <= max <= tile_side / 2")
        return self


def parse_scene_params(data) -> SceneParams:
    if isinstance(data, SceneParams):
        return data
    try:
        return SceneParams.model_validate(data)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid scene params: {validation_message(e)}") from e
        raise ConfigurationError(f"invalid scene params: {e}") from e


@dataclass
class SceneSample:
    tile: np.ndarray
    boxes: list = field(default_factory=list)
    # one H x W blend weight map per blob, 1 in the blob core, 0 outside its support
    alphas: list = field(default_factory=list)
    glare: bool = False
    foam: bool = False


def tile_rng(params: SceneParams, split: str, index: int, stream: int) -> np.random.Generator:
    if split not in SPLIT_CODES:
        raise ConfigurationError(f"unknown split {split!r}")
    if index < 0:
        raise ConfigurationError(f"tile index must be >= 0, got {index}")
    return np.random.default_rng(np.random.SeedSequence([params.seed, SPLIT_CODES[split], index, stream]))


# ---------------------------------------------------------------------
#                             BACKGROUND
# ---------------------------------------------------------------------

def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(side: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Smoothly interpolated random lattice, one lattice cell per `scale` pixels, values in [0, 1]."""
    scale = max(scale, 1.0)
    cells = int(math.ceil(side / scale)) + 2
    grid = rng.random((cells, cells))

    coords = np.arange(side) / scale
    i = np.floor(coords).astype(int)
    f = _fade(coords - i)
    iy, ix = np.meshgrid(i, i, indexing="ij")
    fy, fx = np.meshgrid(f, f, indexing="ij")

    top = grid[iy, ix] + fx * (grid[iy, ix + 1] - grid[iy, ix])
    bottom = grid[iy + 1, ix] + fx * (grid[iy + 1, ix + 1] - grid[iy + 1, ix])
    return top + fy * (bottom - top)


def sea_texture(side: int, wave_scale: float, rng: np.random.Generator) -> np.ndarray:
    coarse = value_noise(side, wave_scale, rng)
    fine = value_noise(side, wave_scale / 2, rng)
    waves = (coarse + 0.5 * fine) / 1.5
    return SEA_RGB[None, None, :] + WAVE_AMPLITUDE * (waves[..., None] - 0.5)


def add_glare(tile: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Oriented streak through a pixel centre, Gaussian across its width, peak value = strength."""
    side = tile.shape[0]
    cy, cx = rng.integers(0, side, size=2)
    theta = rng.uniform(0, np.pi)
    width = rng.uniform(1.5, 4.0)
    yy, xx = np.mgrid[0:side, 0:side]
    dist = np.abs((xx - cx) * np.sin(theta) - (yy - cy) * np.cos(theta))
    profile = np.exp(-0.5 * (dist / width) ** 2)[..., None]
    return tile * (1 - profile) + strength * profile


def add_foam(tile: np.ndarray, density: float, rng: np.random.Generator) -> np.ndarray:
    side = tile.shape[0]
    cy, cx = rng.uniform(0, side, size=2)
    spread = side / 6
    yy, xx = np.mgrid[0:side, 0:side]
    envelope = np.exp(-0.5 * ((yy - cy) ** 2 + (xx - cx) ** 2) / spread ** 2)
    speckle = rng.random((side, side)) < density * envelope
    brightness = rng.uniform(0.75, 0.95, size=(side, side))
    out = tile.copy()
    out[speckle] = brightness[speckle][:, None]
    return out


# ---------------------------------------------------------------------
#                               ANIMALS
# ---------------------------------------------------------------------

def _ellipse_alpha(side: int, cy: int, cx: int, semi_major: float, semi_minor: float, theta: float, softness: float):
    yy, xx = np.mgrid[0:side, 0:side]
    u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    rho = np.sqrt((u / semi_major) ** 2 + (v / semi_minor) ** 2)
    if softness == 0:
        return (rho < 1).astype(np.float64)
    alpha = np.clip((1 - rho) / softness, 0, 1)
    alpha[rho >= 1] = 0
    return alpha


def _bounds(alpha: np.ndarray):
    rows = np.flatnonzero(alpha.any(axis=1))
    cols = np.flatnonzero(alpha.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)


def _overlaps(a, b, margin: int = 1) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return not (ax + aw + margin <= bx or bx + bw + margin <= ax or ay + ah + margin <= by or by + bh + margin <= ay)


def place_animals(params: SceneParams, rng: np.random.Generator):
    """Blend maps and boxes for k non-overlapping blobs, plus each blob's contrast."""
    side = params.tile_side
    lo, hi = params.animal_count_range
    wanted = int(rng.integers(lo, hi + 1))
    alphas, boxes, contrasts = [], [], []

    for _ in range(wanted):
        placed = False
        for _ in range(MAX_PLACEMENT_RETRIES):
            length = rng.uniform(params.animal_size_range[0], params.animal_size_range[1])
            semi_major = max(length / 2, 0.5)
            semi_minor = max(semi_major * rng.uniform(0.4, 0.9), 0.5)
            theta = rng.uniform(0, np.pi)
            reach = int(math.ceil(semi_major))
            cy = int(rng.integers(reach, side - reach)) if side - reach > reach else side // 2
            cx = int(rng.integers(reach, side - reach)) if side - reach > reach else side // 2
            deep = rng.random() < params.deep_fraction

            alpha = _ellipse_alpha(side, cy, cx, semi_major, semi_minor, theta, params.animal_softness)
            box = _bounds(alpha)
            if any(_overlaps(box, other) for other in boxes):
                continue
            alphas.append(alpha)
            boxes.append(box)
            contrasts.append(params.animal_contrast * (params.deep_contrast_scale if deep else 1.0))
            placed = True
            break
        if not placed:
            logger.warning(f"placed {len(boxes)} of {wanted} animals after {MAX_PLACEMENT_RETRIES} retries")
            break
    return alphas, boxes, contrasts


# ---------------------------------------------------------------------
#                               SCENES
# ---------------------------------------------------------------------

def render_scene(params: SceneParams, index: int, split: str = "train", with_animals: bool = False) -> SceneSample:
    background = tile_rng(params, split, index, BACKGROUND_STREAM)
    side = params.tile_side

    tile = sea_texture(side, params.wave_scale, background)
    # nuisance draws happen unconditionally so both flags use the same stream positions
    glare_draw, foam_draw = background.random(2)

    alphas, boxes = [], []
    if with_animals:
        alphas, boxes, contrasts = place_animals(params, tile_rng(params, split, index, ANIMAL_STREAM))
        for alpha, contrast in zip(alphas, contrasts):
            tile = tile + (contrast * alpha)[..., None]

    glare = bool(glare_draw < params.glare_prob)
    foam = bool(foam_draw < params.foam_prob)
    if glare:
        tile = add_glare(tile, params.glare_strength, background)
    if foam:
        tile = add_foam(tile, params.foam_density, background)

    tile = np.clip(tile, 0.0, 1.0).astype(np.float32)
    return SceneSample(tile=tile, boxes=boxes, alphas=alphas, glare=glare, foam=foam)


def gen_normal(params: SceneParams, index: int, split: str = "train") -> np.ndarray:
    return render_scene(params, index, split).tile


def gen_anomalous(params: SceneParams, index: int, split: str = "train"):
    """(tile, ground-truth boxes as (x, y, w, h))."""
    sample = render_scene(params, index, split, with_animals=True)
    return sample.tile, sample.boxes
