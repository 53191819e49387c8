import numpy as np
import pytest

from io_utils.manifest import load_manifest, load_tiles
from synth_scenes.gen_dataset import DatasetParams, gen_dataset
from synth_scenes.sea_surface import SceneParams
from train_model.calibrate_am import calibrate_am, save_sidecar
from train_model.train_vqvae import TrainConfig, train
from vqvae.checkpoint import save_checkpoint
from vqvae.vqvae_model import ModelConfig


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch):
    monkeypatch.setenv("VQAD_NO_PROGRESS", "1")
    monkeypatch.setenv("VQAD_THREADS", "2")
    monkeypatch.delenv("VQAD_LOG_FILE", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """4x downsampling, 8 codes of dimension 4."""
    return ModelConfig(in_channels=3, base_width=4, latent_dim=4, codebook_size=8, downsample_factor=4, seed=0)


@pytest.fixture
def tiny_scene() -> SceneParams:
    """32 x 32 tiles with one or two small animals."""
    return SceneParams(tile_side=32, animal_count_range=(1, 2), animal_size_range=(4, 8), seed=3)


@pytest.fixture
def tiny_tiles(rng) -> np.ndarray:
    return rng.random((6, 32, 32, 3)).astype(np.float32)


@pytest.fixture
def smoke_manifest(tmp_path, tiny_scene):
    """Path of a 16 / 4 / 4 synthetic dataset's manifest.json."""
    params = DatasetParams(scene=tiny_scene, train=16, val=4, test=4, anomalous_fraction=0.5)
    gen_dataset(params, tmp_path / "data")
    return tmp_path / "data" / "manifest.json"


@pytest.fixture(scope="session")
def smoke_checkpoint(tmp_path_factory):
    """A tiny model trained for a few steps on 16 normal 32 x 32 tiles, saved with its sidecar."""
    root = tmp_path_factory.mktemp("smoke_model")
    scene = SceneParams(tile_side=32, animal_count_range=(1, 2), animal_size_range=(4, 8), seed=3)
    data_dir = root / "data"
    gen_dataset(DatasetParams(scene=scene, train=16, val=4, test=4), data_dir)

    tiles, _ = load_tiles(load_manifest(data_dir / "manifest.json"), data_dir, "train")

    model_cfg = ModelConfig(base_width=8, latent_dim=8, codebook_size=16, downsample_factor=4)
    train_cfg = TrainConfig(epochs=2, batch_size=8, learning_rate=1e-3, log_every=1)
    state, _ = train(tiles, model_cfg, train_cfg)
    checkpoint = root / "model.vqad"
    save_checkpoint(state, checkpoint)
    save_sidecar(checkpoint, calibrate_am(state, tiles), train_cfg)
    return checkpoint, data_dir / "manifest.json"
