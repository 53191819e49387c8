"""
Write a synthetic dataset to disk
---------------------------------

INPUTS
 - DatasetParams: SceneParams, tile counts for train / val / test, and the
   anomalous fraction of val and test
 - output directory

OUTPUTS
 - <out>/tiles/<split>/<split>_<index:05d>.png (8-bit RGB)
 - <out>/manifest.json

APPROACH
 1. train: normal tiles only, empty box lists
 2. val / test: exactly round(n * fraction) anomalous tiles, spread over the
    split by a Bresenham rule, the rest normal
 3. Tiles render on the worker pool; files are written by this thread in
    manifest order, so reruns give identical bytes

Runnable on its own (src/ on PYTHONPATH):
    python -m synth_scenes.gen_dataset --params configs/synth_params.json --out runs/data
"""

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from io_utils.config_files import read_config_file
from io_utils.errors import ConfigurationError, validation_message
from io_utils.logging_setup import progress_disabled, setup_logging
from io_utils.manifest import Box, Manifest, ManifestRecord, save_manifest
from io_utils.png_export import save_image, tile_image
from io_utils.stage_runner import run_stage
from io_utils.workers import ordered_map
from synth_scenes.sea_surface import SceneParams, render_scene

logger = logging.getLogger(__name__)


class DatasetParams(BaseModel):
    """The --params file of the gen command."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    scene: SceneParams = Field(default_factory=SceneParams)
    train: int = 2000
    val: int = 100
    test: int = 400
    anomalous_fraction: float = 0.5

    @field_validator("train", "val", "test")
    @classmethod
    def _count(cls, v):
        if v < 0:
            raise ValueError("tile counts must be >= 0")
        return v

    @field_validator("anomalous_fraction")
    @classmethod
    def _fraction(cls, v):
        if not 0 <= v <= 1:
            raise ValueError("anomalous_fraction must be in [0, 1]")
        return v


def parse_dataset_params(data) -> DatasetParams:
    if isinstance(data, DatasetParams):
        return data
    try:
        return DatasetParams.model_validate(data)
    except Exception as e:
        if hasattr(e, "errors"):
            raise ConfigurationError(f"invalid dataset params: {validation_message(e)}") from e
        raise ConfigurationError(f"invalid dataset params: {e}") from e


def anomalous_slots(n: int, fraction: float) -> list:
    """Which of n tiles are anomalous: exactly round(n * fraction) of them, evenly spread."""
    k = int(math.floor(n * fraction + 0.5))
    return [(i + 1) * k // n > i * k // n for i in range(n)] if n else []


def tile_path(split: str, index: int) -> str:
    return f"tiles/{split}/{split}_{index:05d}.png"


def gen_dataset(params: DatasetParams, out_dir) -> Manifest:
    params = parse_dataset_params(params)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"cannot create output directory {out_dir}: {e}") from e

    jobs = [("train", i, False) for i in range(params.train)]
    for split in ("val", "test"):
        n = getattr(params, split)
        jobs.extend((split, i, anomalous) for i, anomalous in enumerate(anomalous_slots(n, params.anomalous_fraction)))

    def _render(job):
        split, index, anomalous = job
        return render_scene(params.scene, index, split, with_animals=anomalous)

    samples = ordered_map(_render, jobs)

    records = []
    for (split, index, _), sample in tqdm(zip(jobs, samples), total=len(jobs), desc="Writing tiles",
                                         unit="tile", disable=progress_disabled()):
        path = tile_path(split, index)
        save_image(tile_image(sample.tile), out_dir / path)
        boxes = [Box(x=x, y=y, w=w, h=h) for x, y, w, h in sample.boxes]
        records.append(ManifestRecord(path=path, split=split, boxes=boxes))

    manifest = Manifest(records=records)
    save_manifest(manifest, out_dir / "manifest.json")
    n_boxes = sum(len(r.boxes) for r in records)
    logger.info(f"wrote {len(records)} tiles ({params.train}/{params.val}/{params.test}) "
                f"with {n_boxes} animal boxes to {out_dir}")
    return manifest


# ---------------------------------------------------------------------
#                            STAGE SCRIPT
# ---------------------------------------------------------------------

def add_gen_args(p):
    p.add_argument("--params", required=True, help="Path to the DatasetParams JSON.")
    p.add_argument("--out", required=True, help="Output directory for tiles and manifest.json.")


def run_gen(args) -> int:
    params = parse_dataset_params(read_config_file(args.params, "params"))
    manifest = gen_dataset(params, args.out)
    print(f"Wrote {len(manifest.records)} tiles and {os.path.join(args.out, 'manifest.json')}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic sea-surface dataset.")
    parser.add_argument("--log-file", help="Log file (default vqad.log, or $VQAD_LOG_FILE).")
    add_gen_args(parser)
    args = parser.parse_args(argv)
    load_dotenv()
    setup_logging(args.log_file)
    return run_stage("gen", run_gen, args)


if __name__ == "__main__":
    sys.exit(main())
