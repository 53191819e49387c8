"""
3) Train stage: manifest in, checkpoint + sidecar + loss log out
----------------------------------------------------------------

INPUTS
 - dataset manifest.json (its train split must carry no boxes)
 - optional TrainingRunConfig JSON {model, train, calibration_percentile}

OUTPUTS
 - <checkpoint>            trained VQVAE
 - <checkpoint>.json       AM calibration sidecar
 - <checkpoint>.log.csv    one row per optimizer step

Runnable on its own (src/ on PYTHONPATH):
    python -m train_model.run_training --data runs/data/manifest.json --config configs/train_config.json --out runs/model.vqad
"""

import argparse
import logging
import sys
from pathlib import Path

from dotenv import load_dotenv

from io_utils.config_files import read_config_file
from io_utils.logging_setup import setup_logging
from io_utils.manifest import check_train_split, load_manifest, load_tiles
from io_utils.stage_runner import run_stage
from io_utils.workers import configure_torch_threads
from train_model.calibrate_am import calibrate_am, save_sidecar
from train_model.train_vqvae import parse_run_config, train, write_training_log
from vqvae.checkpoint import save_checkpoint

logger = logging.getLogger(__name__)


def training_log_path(checkpoint_path) -> Path:
    checkpoint_path = Path(checkpoint_path)
    return checkpoint_path.with_name(checkpoint_path.name + ".log.csv")


def add_train_args(p):
    p.add_argument("--data", required=True, help="Path to the dataset manifest.json.")
    p.add_argument("--config", help="Path to the training config JSON ({model, train, calibration_percentile}).")
    p.add_argument("--out", help="Checkpoint path (default: train.checkpoint_path from the config).")


def run_train(args) -> int:
    run_cfg = parse_run_config(read_config_file(args.config, "training config") if args.config else {})
    checkpoint_path = Path(args.out or run_cfg.train.checkpoint_path)
    train_cfg = run_cfg.train.model_copy(update={"checkpoint_path": str(checkpoint_path)})

    manifest = load_manifest(args.data)
    check_train_split(manifest)
    tiles, _ = load_tiles(manifest, Path(args.data).parent, "train")

    configure_torch_threads()
    state, log = train(tiles, run_cfg.model, train_cfg)
    normalizer = calibrate_am(state, tiles, run_cfg.calibration_percentile)

    save_checkpoint(state, checkpoint_path)
    save_sidecar(checkpoint_path, normalizer, train_cfg)
    write_training_log(log, training_log_path(checkpoint_path))
    print(f"Trained {len(log)} steps, final reconstruction MSE {log.entries[-1].reconstruction:.6f}")
    print(f"Checkpoint: {checkpoint_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Train on the normal-only train split and calibrate the AM.")
    parser.add_argument("--log-file", help="Log file (default vqad.log, or $VQAD_LOG_FILE).")
    add_train_args(parser)
    args = parser.parse_args(argv)
    load_dotenv()
    setup_logging(args.log_file)
    return run_stage("train", run_train, args)


if __name__ == "__main__":
    sys.exit(main())
