import logging

import numpy as np
import pytest
from PIL import Image

from detect_eval.extract_boxes import DetectionBox
from io_utils.config_files import check_seed, read_config_file, write_json
from io_utils.detection_file import (DetectionFile, DetectionRecord, ScoredBox, check_references, load_detections,
                                     record_for, save_detections)
from io_utils.errors import (ConfigurationError, CorruptArtifactError, DataContractError, DataError,
                             UnknownReferenceError)
from io_utils.logging_setup import progress_disabled, setup_logging
from io_utils.manifest import (Box, Manifest, ManifestRecord, check_boxes_in_bounds, check_train_split, load_manifest,
                               load_tiles, save_manifest)
from io_utils.png_export import (PRED_COLOR, TRUTH_COLOR, load_tile_png, map_image, mask_image, overlay_image,
                                 panel_image, save_image, tile_image)
from io_utils.workers import ordered_map, worker_count
from synth_scenes.sea_surface import SceneParams, parse_scene_params
from train_model.train_vqvae import TrainConfig, parse_train_config
from vqvae.vqvae_model import ModelConfig, parse_model_config


def _manifest(*records) -> Manifest:
    return Manifest(records=[ManifestRecord(**r) for r in records])


# ---------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------

def test_manifest_roundtrip(tmp_path):
    manifest = _manifest(
        {"path": "tiles/train/a.png", "split": "train"},
        {"path": "tiles/test/b.png", "split": "test", "boxes": [{"x": 1, "y": 2, "w": 3, "h": 4}]},
    )
    path = save_manifest(manifest, tmp_path / "manifest.json")
    assert load_manifest(path) == manifest
    assert [r.path for r in manifest.split("test")] == ["tiles/test/b.png"]
    assert set(manifest.by_path()) == {"tiles/train/a.png", "tiles/test/b.png"}


def test_manifest_unknown_split_query():
    with pytest.raises(ConfigurationError):
        _manifest().split("holdout")


def test_missing_manifest(tmp_path):
    with pytest.raises(ConfigurationError):
        load_manifest(tmp_path / "nope.json")


@pytest.mark.parametrize("content", [
    "{not json",
    '{"records": [{"path": "a.png", "split": "holdout"}]}',
    '{"records": [{"path": "a.png", "split": "test", "boxes": [{"x": 0, "y": 0, "w": 0, "h": 2}]}]}',
    '{"records": [{"path": "a.png", "split": "test"}, {"path": "a.png", "split": "val"}]}',
    '{"records": [], "extra": 1}',
])
def test_corrupt_manifest(tmp_path, content):
    path = tmp_path / "manifest.json"
    path.write_text(content)
    with pytest.raises(CorruptArtifactError):
        load_manifest(path)


def test_train_records_must_be_empty():
    check_train_split(_manifest({"path": "a.png", "split": "train"}))
    with pytest.raises(DataContractError):
        check_train_split(_manifest({"path": "a.png", "split": "train", "boxes": [{"x": 0, "y": 0, "w": 2, "h": 2}]}))


def test_box_outside_image():
    record = ManifestRecord(path="a.png", split="test", boxes=[Box(x=30, y=0, w=4, h=4)])
    check_boxes_in_bounds(record, 32, 34)
    with pytest.raises(DataContractError):
        check_boxes_in_bounds(record, 32, 32)


def test_load_tiles(tmp_path, rng):
    tiles = rng.random((2, 8, 8, 3))
    for i, t in enumerate(tiles):
        save_image(tile_image(t), tmp_path / f"t{i}.png")
    manifest = _manifest({"path": "t0.png", "split": "val"}, {"path": "t1.png", "split": "val"})
    loaded, records = load_tiles(manifest, tmp_path, "val")
    assert loaded.shape == (2, 8, 8, 3) and loaded.dtype == np.float32
    np.testing.assert_allclose(loaded, np.rint(tiles * 255) / 255, atol=1e-6)
    assert [r.path for r in records] == ["t0.png", "t1.png"]
    with pytest.raises(DataError):
        load_tiles(manifest, tmp_path, "test")


def test_load_tiles_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_tiles(_manifest({"path": "gone.png", "split": "test"}), tmp_path, "test")


def test_load_tiles_box_out_of_bounds(tmp_path):
    save_image(tile_image(np.zeros((8, 8, 3))), tmp_path / "t.png")
    manifest = _manifest({"path": "t.png", "split": "test", "boxes": [{"x": 6, "y": 6, "w": 4, "h": 1}]})
    with pytest.raises(DataContractError):
        load_tiles(manifest, tmp_path, "test")


# ---------------------------------------------------------------------
# detections file
# ---------------------------------------------------------------------

def test_detections_roundtrip(tmp_path):
    record = record_for("tiles/test/a.png", [DetectionBox(1, 2, 3, 4, 0.5)])
    detections = DetectionFile(records=[record, DetectionRecord(image="tiles/test/b.png")])
    path = save_detections(detections, tmp_path / "det.json")
    loaded = load_detections(path)
    assert loaded == detections
    assert loaded.by_image()["tiles/test/a.png"] == [ScoredBox(x=1, y=2, w=3, h=4, score=0.5)]


def test_missing_detections(tmp_path):
    with pytest.raises(ConfigurationError):
        load_detections(tmp_path / "det.json")


@pytest.mark.parametrize("content", [
    "[",
    '{"records": [{"image": "a.png", "boxes": [{"x": 0, "y": 0, "w": 1, "h": 1}]}]}',
    '{"records": [{"image": "a.png", "boxes": [{"x": -1, "y": 0, "w": 1, "h": 1, "score": 0}]}]}',
    '{"records": [{"image": "a.png"}, {"image": "a.png"}]}',
])
def test_corrupt_detections(tmp_path, content):
    path = tmp_path / "det.json"
    path.write_text(content)
    with pytest.raises(CorruptArtifactError):
        load_detections(path)


def test_non_finite_score_is_rejected():
    with pytest.raises(ValueError):
        ScoredBox(x=0, y=0, w=1, h=1, score=float("nan"))


def test_unknown_image_reference():
    detections = DetectionFile(records=[DetectionRecord(image="a.png"), DetectionRecord(image="z.png")])
    check_references(detections, ["a.png", "z.png", "q.png"])
    with pytest.raises(UnknownReferenceError):
        check_references(detections, ["a.png"])


# ---------------------------------------------------------------------
# PNG export
# ---------------------------------------------------------------------

def test_image_modes(rng):
    assert tile_image(rng.random((8, 8, 3))).mode == "RGB"
    assert tile_image(rng.random((8, 8))).mode == "RGB"
    assert map_image(rng.random((8, 8))).mode == "I;16"
    assert mask_image(rng.random((8, 8)) > 0.5).mode == "1"


def test_map_image_scaling():
    arr = np.asarray(map_image(np.array([[0.0, 1.0], [0.5, 2.0]])))
    np.testing.assert_array_equal(arr, [[0, 65535], [32768, 65535]])


def test_mask_image_values():
    mask = np.zeros((4, 4), bool)
    mask[1, 2] = True
    np.testing.assert_array_equal(np.asarray(mask_image(mask)), mask)


def test_overlay_colours():
    image = overlay_image(np.zeros((16, 16, 3)), truth=[(1, 1, 4, 4)], predicted=[{"x": 8, "y": 8, "w": 3, "h": 3}])
    assert image.getpixel((1, 1)) == TRUTH_COLOR
    assert image.getpixel((4, 4)) == TRUTH_COLOR
    assert image.getpixel((2, 2)) == (0, 0, 0)
    assert image.getpixel((10, 8)) == PRED_COLOR
    assert image.getpixel((9, 9)) == (0, 0, 0)


def test_panel_width():
    images = [Image.new("RGB", (8, 8)), Image.new("L", (5, 6))]
    panel = panel_image(images, gap=2)
    assert panel.size == (15, 8)
    assert panel.getpixel((8, 0)) == (255, 255, 255)


def test_tile_png_roundtrip(tmp_path, rng):
    tile = rng.random((8, 8, 3))
    path = save_image(tile_image(tile), tmp_path / "sub" / "t.png")
    np.testing.assert_allclose(load_tile_png(path), np.rint(tile * 255) / 255, atol=1e-6)


def test_unreadable_png(tmp_path):
    path = tmp_path / "t.png"
    path.write_bytes(b"not a png")
    with pytest.raises(CorruptArtifactError):
        load_tile_png(path)
    with pytest.raises(DataError):
        load_tile_png(tmp_path / "missing.png")


# ---------------------------------------------------------------------
# config files, workers, logging
# ---------------------------------------------------------------------

def test_read_config_file(tmp_path):
    path = write_json({"b": 1, "a": [1, 2]}, tmp_path / "cfg.json")
    assert read_config_file(path) == {"a": [1, 2], "b": 1}
    assert path.read_text().startswith('{\n    "a"')


@pytest.mark.parametrize("content", ["{", "[1, 2]"])
def test_bad_config_file(tmp_path, content):
    path = tmp_path / "cfg.json"
    path.write_text(content)
    with pytest.raises(ConfigurationError):
        read_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path / "none.json")
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path)


def test_worker_count(monkeypatch):
    assert worker_count() == 2
    monkeypatch.setenv("VQAD_THREADS", "0")
    with pytest.raises(ConfigurationError):
        worker_count()
    monkeypatch.setenv("VQAD_THREADS", "many")
    with pytest.raises(ConfigurationError):
        worker_count()
    monkeypatch.delenv("VQAD_THREADS")
    assert worker_count() >= 1


def test_ordered_map_keeps_input_order():
    def square(x):
        return x * x

    assert ordered_map(square, range(50), workers=4) == [x * x for x in range(50)]
    assert ordered_map(square, [], workers=4) == []


def test_progress_switch(monkeypatch):
    assert progress_disabled()
    monkeypatch.setenv("VQAD_NO_PROGRESS", "0")
    assert not progress_disabled()


def test_setup_logging_writes_file(tmp_path):
    log_file = tmp_path / "run.log"
    setup_logging(log_file)
    logging.getLogger("vqad.test").info("hello from the test")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "hello from the test" in log_file.read_text()


def test_one_seed_range_for_every_config():
    top = 2**64 - 1
    assert ModelConfig(seed=top).seed == top
    assert TrainConfig(seed=top).seed == top
    assert SceneParams(seed=top).seed == top
    for bad in (-1, 2**64):
        with pytest.raises(ValueError):
            check_seed(bad)
        with pytest.raises(ConfigurationError):
            parse_model_config({"seed": bad})
        with pytest.raises(ConfigurationError):
            parse_train_config({"seed": bad})
        with pytest.raises(ConfigurationError):
            parse_scene_params({"seed": bad})
