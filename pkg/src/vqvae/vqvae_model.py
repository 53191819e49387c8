"""
VQ-VAE core
-----------

Encoder, nearest-neighbour vector quantizer over a learned codebook, decoder,
and the three-term training loss with a straight-through quantizer.

INPUTS
 - ModelConfig: channels, widths, latent size D, codebook size M, downsample
   factor f, commitment weight beta, seed
 - tiles: H x W x C float arrays in [0, 1], H and W divisible by f

OUTPUTS
 - VQVAE module (the model state), Quantization records, reconstructions,
   LossBreakdown records

APPROACH
 1. Encoder
    - log2(f) stride-2 4x4 convs with ReLU, then a 1x1 conv into the D-dim
      latent grid (h = H/f, w = W/f). f = 8 gives the three-block encoder.
 2. Quantizer
    - exact float64 Euclidean distances to every code vector, argmin with the
      smallest index winning ties, residual = the winning distance
    - quantized rows are copied out of the codebook, so they are bit-equal to it
 3. Decoder
    - 1x1 conv out of the latent, mirrored stride-2 transposed convs, sigmoid
 4. Loss
    - rec = MSE(tile, recon); cb = mean ||sg(z_e) - z_q||^2 per cell;
      com = mean ||z_e - sg(z_q)||^2 per cell; total = rec + cb + beta * com
    - the decoder sees z_e + sg(z_q - z_e), so its input gradient flows
      straight into z_e
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from dataclasses_json import dataclass_json
from pydantic import BaseModel, ConfigDict, field_validator
from torch import nn

from io_utils.config_files import check_seed
from io_utils.errors import ConfigurationError, ShapeError, validation_message

logger = logging.getLogger(__name__)

ALLOWED_FACTORS = (2, 4, 8)

# rows of the distance matrix computed per chunk, scaled so rows * M * D stays bounded
_DISTANCE_BUDGET = 1 << 22


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    in_channels: int = 3
    base_width: int = 32
    latent_dim: int = 32
    codebook_size: int = 256
    downsample_factor: int = 8
    commitment_beta: float = 0.25
    seed: int = 0

    @field_validator("in_channels", "base_width", "latent_dim")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("codebook_size")
    @classmethod
    def _codebook_size(cls, v):
        if v < 2:
            raise ValueError("codebook needs at least 2 vectors")
        return v

    @field_validator("downsample_factor")
    @classmethod
    def _factor(cls, v):
        if v not in ALLOWED_FACTORS:
            raise ValueError(f"downsample factor must be one of {ALLOWED_FACTORS}")
        return v

    @field_validator("commitment_beta")
    @classmethod
    def _beta(cls, v):
        if not math.isfinite(v) or v < 0:
            raise ValueError("commitment beta must be finite and >= 0")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        return check_seed(v)


def parse_model_config(data) -> ModelConfig:
    if isinstance(data, ModelConfig):
        return data
    try:
        return ModelConfig.model_validate(data)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid model config: {validation_message(e)}") from e
        raise ConfigurationError(f"invalid model config: {e}") from e


@dataclass
class Quantization:
    """indices (h, w) int64, quantized (h, w, D) float32, residuals (h, w) float32."""
    indices: np.ndarray
    quantized: np.ndarray
    residuals: np.ndarray


@dataclass_json
@dataclass
class LossBreakdown:
    reconstruction: float
    codebook: float
    commitment: float
    total: float


# ---------------------------------------------------------------------
#                               MODEL
# ---------------------------------------------------------------------

class VQVAE(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        n_blocks = int(round(math.log2(config.downsample_factor)))
        widths = [config.base_width * (2 ** i) for i in range(n_blocks)]

        enc = []
        in_ch = config.in_channels
        for w in widths:
            enc += [nn.Conv2d(in_ch, w, kernel_size=4, stride=2, padding=1), nn.ReLU()]
            in_ch = w
        enc.append(nn.Conv2d(in_ch, config.latent_dim, kernel_size=1))
        self.encoder = nn.Sequential(*enc)

        dec = [nn.Conv2d(config.latent_dim, widths[-1], kernel_size=1), nn.ReLU()]
        for i in reversed(range(n_blocks)):
            out_ch = widths[i - 1] if i > 0 else config.in_channels
            dec.append(nn.ConvTranspose2d(widths[i], out_ch, kernel_size=4, stride=2, padding=1))
            if i > 0:
                dec.append(nn.ReLU())
        dec.append(nn.Sigmoid())
        self.decoder = nn.Sequential(*dec)

        m = config.codebook_size
        self.codebook = nn.Parameter(torch.empty(m, config.latent_dim))
        nn.init.uniform_(self.codebook, -1.0 / m, 1.0 / m)
        self._break_codebook_ties()

    @torch.no_grad()
    def _break_codebook_ties(self):
        # redraw any row that is bit-identical to an earlier one
        m = self.config.codebook_size
        while True:
            rows = [tuple(r) for r in self.codebook.detach().numpy().tolist()]
            seen, dupes = set(), []
            for i, r in enumerate(rows):
                if r in seen:
                    dupes.append(i)
                seen.add(r)
            if not dupes:
                return
            logger.warning(f"redrawing {len(dupes)} duplicated code vectors")
            self.codebook[dupes] = torch.empty(len(dupes), self.config.latent_dim).uniform_(-1.0 / m, 1.0 / m)

    def forward(self, x):
        """x: (B, C, H, W). Returns recon, z_e, z_q, indices, residuals."""
        z_e = self.encoder(x)
        indices, z_q, residuals = quantize_tensor(z_e, self.codebook)
        z_st = z_e + (z_q - z_e).detach()
        recon = self.decoder(z_st)
        return recon, z_e, z_q, indices, residuals


def init_model(config) -> VQVAE:
    """Deterministic in (config, seed): same config twice gives bit-identical weights."""
    config = parse_model_config(config)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = VQVAE(config)
    model.eval()
    return model


# ---------------------------------------------------------------------
#                               QUANTIZER
# ---------------------------------------------------------------------

@torch.no_grad()
def nearest_codes(flat: torch.Tensor, codebook: torch.Tensor):
    """
    flat: (N, D), codebook: (M, D). Returns (indices (N,), distances (N,)) from
    exact float64 distances; torch.argmin returns the first minimum on ties.
    """
    flat = flat.detach().to(torch.float64)
    cb = codebook.detach().to(torch.float64)
    m, d = cb.shape
    rows = max(1, _DISTANCE_BUDGET // (m * d))
    indices, dists = [], []
    for start in range(0, flat.shape[0], rows):
        dist = torch.cdist(flat[start:start + rows], cb, compute_mode="donot_use_mm_for_euclid_dist")
        idx = torch.argmin(dist, dim=1)
        indices.append(idx)
        dists.append(dist.gather(1, idx[:, None]).squeeze(1))
    if not indices:
        return torch.empty(0, dtype=torch.int64), torch.empty(0, dtype=torch.float64)
    return torch.cat(indices), torch.cat(dists)


def quantize_tensor(z_e: torch.Tensor, codebook: torch.Tensor):
    """
    z_e: (B, D, h, w). Returns indices (B, h, w), z_q (B, D, h, w) carrying the
    codebook gradient, residuals (B, h, w) float32.
    """
    b, d, h, w = z_e.shape
    if d != codebook.shape[1]:
        raise ShapeError(f"latent dim {d} does not match codebook dim {codebook.shape[1]}")
    flat = z_e.permute(0, 2, 3, 1).reshape(-1, d)
    idx, dist = nearest_codes(flat, codebook)
    z_q = F.embedding(idx, codebook).reshape(b, h, w, d).permute(0, 3, 1, 2).contiguous()
    return idx.reshape(b, h, w), z_q, dist.to(torch.float32).reshape(b, h, w)


def quantize(z_e: np.ndarray, codebook: np.ndarray) -> Quantization:
    """Quantize one h x w x D latent field against an M x D codebook."""
    z_e = np.asarray(z_e)
    codebook = np.asarray(codebook)
    if z_e.ndim != 3 or codebook.ndim != 2:
        raise ShapeError(f"expected (h, w, D) field and (M, D) codebook, got {z_e.shape} and {codebook.shape}")
    h, w, d = z_e.shape
    if d != codebook.shape[1]:
        raise ShapeError(f"latent dim {d} does not match codebook dim {codebook.shape[1]}")
    idx, dist = nearest_codes(torch.from_numpy(z_e.reshape(-1, d)), torch.from_numpy(codebook))
    idx = idx.numpy()
    return Quantization(
        indices=idx.reshape(h, w),
        quantized=codebook[idx].reshape(h, w, d).astype(np.float32, copy=False),
        residuals=dist.numpy().astype(np.float32).reshape(h, w),
    )


def codebook_of(state: VQVAE) -> np.ndarray:
    return state.codebook.detach().numpy().copy()


# ---------------------------------------------------------------------
#                               INFERENCE
# ---------------------------------------------------------------------

def _check_tiles(state: VQVAE, tiles: np.ndarray):
    cfg = state.config
    if tiles.ndim != 4:
        raise ShapeError(f"expected (N, H, W, C) tiles, got shape {tiles.shape}")
    _, h, w, c = tiles.shape
    if c != cfg.in_channels:
        raise ShapeError(f"tile has {c} channels, model expects {cfg.in_channels}")
    f = cfg.downsample_factor
    if h % f or w % f or h == 0 or w == 0:
        raise ShapeError(f"tile side {h}x{w} is not divisible by the downsample factor {f}")


def _to_nchw(tiles: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(tiles, dtype=np.float32)).permute(0, 3, 1, 2)


def encode(state: VQVAE, tile: np.ndarray) -> np.ndarray:
    tile = np.asarray(tile)
    if tile.ndim != 3:
        raise ShapeError(f"expected an H x W x C tile, got shape {tile.shape}")
    _check_tiles(state, tile[None])
    with torch.no_grad():
        z_e = state.encoder(_to_nchw(tile[None]))
    return z_e[0].permute(1, 2, 0).numpy().copy()


def decode(state: VQVAE, z_q) -> np.ndarray:
    quantized = z_q.quantized if isinstance(z_q, Quantization) else np.asarray(z_q)
    if quantized.ndim != 3 or quantized.shape[2] != state.config.latent_dim:
        raise ShapeError(
            f"expected an (h, w, {state.config.latent_dim}) quantized field, got {quantized.shape}"
        )
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(quantized, dtype=np.float32)).permute(2, 0, 1)[None]
        recon = state.decoder(x)
    return recon[0].permute(1, 2, 0).numpy().copy()


def reconstruct_batch(state: VQVAE, tiles: np.ndarray):
    """Returns (reconstructions (N, H, W, C), list of Quantization)."""
    tiles = np.asarray(tiles)
    _check_tiles(state, tiles)
    with torch.no_grad():
        recon, _, z_q, indices, residuals = state(_to_nchw(tiles))
    recon = recon.permute(0, 2, 3, 1).numpy().copy()
    z_q = z_q.permute(0, 2, 3, 1).numpy()
    quants = [
        Quantization(indices=indices[i].numpy().copy(), quantized=z_q[i].copy(), residuals=residuals[i].numpy().copy())
        for i in range(tiles.shape[0])
    ]
    return recon, quants


def reconstruct(state: VQVAE, tile: np.ndarray):
    tile = np.asarray(tile)
    if tile.ndim != 3:
        raise ShapeError(f"expected an H x W x C tile, got shape {tile.shape}")
    recon, quants = reconstruct_batch(state, tile[None])
    return recon[0], quants[0]


def codebook_usage(state: VQVAE, tiles: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Hit count per code vector over a set of tiles."""
    counts = np.zeros(state.config.codebook_size, dtype=np.int64)
    for start in range(0, len(tiles), batch_size):
        _, quants = reconstruct_batch(state, np.asarray(tiles[start:start + batch_size]))
        for q in quants:
            counts += np.bincount(q.indices.ravel(), minlength=state.config.codebook_size)
    return counts


# ---------------------------------------------------------------------
#                               LOSS
# ---------------------------------------------------------------------

def vqvae_loss(tile: torch.Tensor, recon: torch.Tensor, z_e: torch.Tensor, z_q: torch.Tensor, beta: float):
    """
    All tensors NCHW. Returns (total tensor for backward, LossBreakdown of floats).
    """
    if tile.shape != recon.shape:
        raise ShapeError(f"tile {tuple(tile.shape)} and reconstruction {tuple(recon.shape)} differ")
    if z_e.shape != z_q.shape:
        raise ShapeError(f"latent {tuple(z_e.shape)} and quantized {tuple(z_q.shape)} differ")

    rec = F.mse_loss(recon, tile)
    cb = (z_e.detach() - z_q).pow(2).sum(dim=1).mean()
    com = (z_e - z_q.detach()).pow(2).sum(dim=1).mean()
    total = rec + cb + beta * com
    breakdown = LossBreakdown(
        reconstruction=float(rec.detach()),
        codebook=float(cb.detach()),
        commitment=float(com.detach()),
        total=float(total.detach()),
    )
    return total, breakdown
