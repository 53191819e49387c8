"""
3) Calibrate the alignment map
------------------------------

Raw quantization residuals live on whatever scale the trained latent space
happens to have. Calibration fixes that scale from normal tiles so AM values
sit around [0, 1] on normal content.

INPUTS
 - trained VQVAE
 - normal tiles (usually the train split)
 - percentile q in (0, 100], 99 by default

OUTPUTS
 - AmNormalizer(scale, percentile_q), stored in the checkpoint sidecar
   (<checkpoint>.json) next to the TrainConfig

APPROACH
 1. Collect every per-cell residual ||z_e - e_k|| over the tiles
 2. scale = q-th percentile (linear interpolation)
 3. If that is 0, fall back to the max residual, then to 1.0
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from dataclasses_json import dataclass_json

from io_utils.errors import ConfigurationError, CorruptArtifactError, DataError
from vqvae.vqvae_model import VQVAE, reconstruct_batch

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILE = 99.0


@dataclass_json
@dataclass
class AmNormalizer:
    scale: float
    percentile_q: float = DEFAULT_PERCENTILE


def scale_from_residuals(residuals: np.ndarray, percentile_q: float) -> float:
    if not 0 < percentile_q <= 100:
        raise ConfigurationError(f"percentile must be in (0, 100], got {percentile_q}")
    residuals = np.asarray(residuals, dtype=np.float64).ravel()
    if residuals.size == 0:
        raise DataError("no residuals to calibrate on")
    scale = float(np.percentile(residuals, percentile_q))
    if scale > 0:
        return scale
    top = float(residuals.max())
    if top > 0:
        logger.warning(f"{percentile_q}th percentile residual is 0, using the max residual {top}")
        return top
    logger.warning("all calibration residuals are 0, using scale 1.0")
    return 1.0


def calibrate_am(state: VQVAE, normal_tiles, percentile_q: float = DEFAULT_PERCENTILE, batch_size: int = 64) -> AmNormalizer:
    if not 0 < percentile_q <= 100:
        raise ConfigurationError(f"percentile must be in (0, 100], got {percentile_q}")
    tiles = normal_tiles if isinstance(normal_tiles, np.ndarray) else list(normal_tiles)
    if len(tiles) == 0:
        raise DataError("calibration dataset is empty")

    residuals = []
    for start in range(0, len(tiles), batch_size):
        batch = np.asarray(tiles[start:start + batch_size], dtype=np.float32)
        _, quants = reconstruct_batch(state, batch)
        residuals.extend(q.residuals.ravel() for q in quants)

    scale = scale_from_residuals(np.concatenate(residuals), percentile_q)
    logger.info(f"AM scale {scale:.6g} from the {percentile_q}th percentile over {len(tiles)} tiles")
    return AmNormalizer(scale=scale, percentile_q=percentile_q)


# ---------------------------------------------------------------------
#                               SIDECAR
# ---------------------------------------------------------------------

def sidecar_path(checkpoint_path) -> Path:
    checkpoint_path = Path(checkpoint_path)
    return checkpoint_path.with_name(checkpoint_path.name + ".json")


def save_sidecar(checkpoint_path, normalizer: AmNormalizer, train_cfg) -> Path:
    path = sidecar_path(checkpoint_path)
    payload = {
        "am_normalizer": normalizer.to_dict(),
        "calibration_percentile": normalizer.percentile_q,
        "train_config": train_cfg.model_dump(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=4, sort_keys=True)
    return path


def load_sidecar(checkpoint_path) -> AmNormalizer:
    path = sidecar_path(checkpoint_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        normalizer = AmNormalizer.from_dict(payload["am_normalizer"])
    except FileNotFoundError:
        raise ConfigurationError(f"calibration sidecar not found: {path}")
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CorruptArtifactError(f"{path}: unreadable calibration sidecar ({e})")
    if not normalizer.scale > 0:
        raise CorruptArtifactError(f"{path}: AM scale must be > 0, got {normalizer.scale}")
    return normalizer
