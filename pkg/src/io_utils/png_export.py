"""
PNG in / out for tiles, maps, masks and inspection overlays.

 - tiles: 8-bit RGB
 - SM / AM maps: 16-bit grayscale, value * 65535 clamped
 - Amap: 1-bit
 - overlay: tile with 1-pixel box outlines, green = truth, red = predicted
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, UnidentifiedImageError

from io_utils.errors import ConfigurationError, CorruptArtifactError, DataError

TRUTH_COLOR = (0, 255, 0)
PRED_COLOR = (255, 0, 0)


def _to_uint8(tile: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(tile, dtype=np.float64) * 255), 0, 255).astype(np.uint8)


def tile_image(tile: np.ndarray) -> Image.Image:
    tile = np.asarray(tile)
    if tile.ndim == 2:
        tile = np.repeat(tile[..., None], 3, axis=2)
    return Image.fromarray(_to_uint8(tile)).convert("RGB")


def map_image(values: np.ndarray) -> Image.Image:
    scaled = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 65535), 0, 65535).astype(np.uint16)
    return Image.fromarray(scaled)


def mask_image(mask: np.ndarray) -> Image.Image:
    return Image.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255).convert("1")


def _xywh(box):
    if isinstance(box, dict):
        return box["x"], box["y"], box["w"], box["h"]
    if hasattr(box, "x"):
        return box.x, box.y, box.w, box.h
    return tuple(box[:4])


def overlay_image(tile: np.ndarray, truth=(), predicted=()) -> Image.Image:
    image = tile_image(tile)
    draw = ImageDraw.Draw(image)
    for boxes, color in ((truth, TRUTH_COLOR), (predicted, PRED_COLOR)):
        for box in boxes:
            x, y, w, h = _xywh(box)
            draw.rectangle([x, y, x + w - 1, y + h - 1], outline=color, width=1)
    return image


def panel_image(images, gap: int = 2) -> Image.Image:
    """Images side by side, left to right, on a white strip."""
    images = [im.convert("RGB") for im in images]
    height = max(im.height for im in images)
    width = sum(im.width for im in images) + gap * (len(images) - 1)
    panel = Image.new("RGB", (width, height), (255, 255, 255))
    x = 0
    for im in images:
        panel.paste(im, (x, 0))
        x += im.width + gap
    return panel


def normalised_preview(values: np.ndarray) -> Image.Image:
    """8-bit view of a map for panels (min-max stretched, constant maps render black)."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    stretched = np.zeros_like(values) if hi <= lo else (values - lo) / (hi - lo)
    return tile_image(stretched)


def save_image(image: Image.Image, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        image.save(path, format="PNG")
    except OSError as e:
        raise ConfigurationError(f"cannot write {path}: {e}") from e
    return path


def load_tile_png(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    except FileNotFoundError:
        raise DataError(f"tile not found: {path}")
    except (UnidentifiedImageError, OSError) as e:
        raise CorruptArtifactError(f"{path}: unreadable PNG ({e})")
    return arr / 255.0
