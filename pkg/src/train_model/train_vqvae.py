"""
2) Train the VQ-VAE on normal tiles
-----------------------------------

Normal-only training: the loop only ever sees image tiles, never boxes or
labels, so "trained only on empty images" holds by construction.

INPUTS
 - normal_tiles: N tiles (H x W x C, values in [0, 1]) from the train split
 - ModelConfig, TrainConfig

OUTPUTS
 - the trained VQVAE (eval mode)
 - TrainingLog: one LossBreakdown per optimizer step, writable as CSV
   (step, rec, cb, com, total)

APPROACH
 1. Validate the dataset (nonempty, one shape, values in [0, 1])
 2. Init the model from ModelConfig.seed, Adam at the configured rate
 3. Every epoch shuffle once with the seeded generator, walk the batches in order
 4. Straight-through forward pass, total = rec + cb + beta * com, one Adam step
 5. Deterministic algorithms are forced on for the run, so a fixed seed and
    dataset order reproduce the same weights on the same platform
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from io_utils.config_files import check_seed
from io_utils.errors import ConfigurationError, DataError, ShapeError, validation_message
from io_utils.logging_setup import progress_disabled
from vqvae.vqvae_model import LossBreakdown, ModelConfig, VQVAE, codebook_usage, init_model, parse_model_config, vqvae_loss

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 2e-4
    seed: int = 0
    checkpoint_path: str = "model.vqad"
    log_every: int = 50

    @field_validator("epochs", "batch_size", "log_every")
    @classmethod
    def _at_least_one(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("learning_rate")
    @classmethod
    def _lr(cls, v):
        if not math.isfinite(v) or v <= 0:
            raise ValueError("learning rate must be > 0")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        return check_seed(v)


class TrainingRunConfig(BaseModel):
    """The --config file of the train command."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    calibration_percentile: float = 99.0

    @field_validator("calibration_percentile")
    @classmethod
    def _q(cls, v):
        if not 0 < v <= 100:
            raise ValueError("percentile must be in (0, 100]")
        return v


def parse_train_config(data) -> TrainConfig:
    if isinstance(data, TrainConfig):
        return data
    try:
        return TrainConfig.model_validate(data)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid train config: {validation_message(e)}") from e
        raise ConfigurationError(f"invalid train config: {e}") from e


def parse_run_config(data) -> TrainingRunConfig:
    if isinstance(data, TrainingRunConfig):
        return data
    try:
        return TrainingRunConfig.model_validate(data)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid training config: {validation_message(e)}") from e
        raise ConfigurationError(f"invalid training config: {e}") from e


@dataclass
class TrainingLog:
    entries: list = field(default_factory=list)

    def append(self, breakdown: LossBreakdown):
        self.entries.append(breakdown)

    def __len__(self):
        return len(self.entries)

    def reconstruction_losses(self) -> np.ndarray:
        return np.array([e.reconstruction for e in self.entries], dtype=np.float64)


def write_training_log(log: TrainingLog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "rec", "cb", "com", "total"])
        for step, e in enumerate(log.entries, start=1):
            writer.writerow([step, repr(e.reconstruction), repr(e.codebook), repr(e.commitment), repr(e.total)])
    return path


def stack_tiles(tiles) -> np.ndarray:
    """Stack a dataset of tiles into (N, H, W, C) float32, enforcing one shape and [0, 1] values."""
    if isinstance(tiles, np.ndarray):
        if tiles.ndim != 4:
            raise ShapeError(f"expected (N, H, W, C) tiles, got shape {tiles.shape}")
        arr = tiles
    else:
        tiles = list(tiles)
        if not tiles:
            raise DataError("dataset is empty")
        shapes = {np.shape(t) for t in tiles}
        if len(shapes) != 1:
            raise ShapeError(f"tiles have inconsistent shapes: {sorted(shapes)}")
        if len(next(iter(shapes))) != 3:
            raise ShapeError(f"expected H x W x C tiles, got shape {next(iter(shapes))}")
        arr = np.stack(tiles)
    if arr.shape[0] == 0:
        raise DataError("dataset is empty")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise DataError("tile values must be finite and within [0, 1]")
    return arr


def train(normal_tiles, model_cfg, train_cfg):
    """Returns (state, TrainingLog). len(log) == epochs * ceil(N / batch_size)."""
    model_cfg = parse_model_config(model_cfg)
    train_cfg = parse_train_config(train_cfg)
    tiles = stack_tiles(normal_tiles)
    n = tiles.shape[0]

    state = init_model(model_cfg)
    if tiles.shape[3] != model_cfg.in_channels:
        raise ShapeError(f"tiles have {tiles.shape[3]} channels, model expects {model_cfg.in_channels}")
    f = model_cfg.downsample_factor
    if tiles.shape[1] % f or tiles.shape[2] % f:
        raise ShapeError(f"tile side {tiles.shape[1]}x{tiles.shape[2]} is not divisible by {f}")

    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    logger.info(
        f"training on {n} normal tiles {tiles.shape[1:]} for {train_cfg.epochs} epochs "
        f"({total_steps} steps, batch {train_cfg.batch_size}, lr {train_cfg.learning_rate})"
    )

    optimizer = torch.optim.Adam(state.parameters(), lr=train_cfg.learning_rate)
    rng = np.random.default_rng(train_cfg.seed)
    log = TrainingLog()
    beta = model_cfg.commitment_beta

    was_deterministic = torch.are_deterministic_algorithms_enabled()
    torch.use_deterministic_algorithms(True)
    state.train()
    try:
        with tqdm(total=total_steps, desc="train", unit="step", disable=progress_disabled()) as bar:
            for epoch in range(train_cfg.epochs):
                order = rng.permutation(n)
                for start in range(0, n, train_cfg.batch_size):
                    batch = torch.from_numpy(tiles[order[start:start + train_cfg.batch_size]]).permute(0, 3, 1, 2)
                    recon, z_e, z_q, _, _ = state(batch)
                    total, breakdown = vqvae_loss(batch, recon, z_e, z_q, beta)

                    optimizer.zero_grad(set_to_none=True)
                    total.backward()
                    optimizer.step()

                    log.append(breakdown)
                    step = len(log)
                    bar.update(1)
                    bar.set_postfix(rec=f"{breakdown.reconstruction:.4f}")
                    if step % train_cfg.log_every == 0 or step == total_steps:
                        logger.info(
                            f"epoch {epoch + 1} step {step}/{total_steps}: rec {breakdown.reconstruction:.5f} "
                            f"cb {breakdown.codebook:.5f} com {breakdown.commitment:.5f} total {breakdown.total:.5f}"
                        )
    finally:
        torch.use_deterministic_algorithms(was_deterministic)
        state.eval()

    used = codebook_usage(state, tiles[: min(n, 256)])
    logger.info(
        f"training done: final rec {log.entries[-1].reconstruction:.5f}, "
        f"{int((used == 0).sum())}/{model_cfg.codebook_size} codes unused on the first {min(n, 256)} tiles"
    )
    return state, log
