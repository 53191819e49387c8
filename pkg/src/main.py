import argparse
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

from dotenv import load_dotenv

from io_utils.logging_setup import setup_logging
from io_utils.stage_runner import run_stage

logger = logging.getLogger(__name__)

MAIN_SCRIPT = os.path.abspath(__file__)
SRC_DIR = os.path.dirname(MAIN_SCRIPT)


# ---------------------------------------------------------------------
#                              COMMANDS
# ---------------------------------------------------------------------

def cmd_gen(args):
    from synth_scenes.gen_dataset import run_gen

    return run_gen(args)


def cmd_train(args):
    from train_model.run_training import run_train

    return run_train(args)


def _detection_settings(args):
    from detect_eval.run_detection import detection_settings
    from io_utils.config_files import read_config_file

    base = read_config_file(args.settings, "detection settings") if args.settings else {}
    overrides = {
        "lambda_sm": getattr(args, "lambda_sm", None),
        "lambda_am": getattr(args, "lambda_am", None),
        "connectivity": args.connectivity,
        "min_area": args.min_area,
        "selem_radius": args.selem_radius,
        "fusion_mode": args.fusion,
    }
    return detection_settings(**{**base, **{k: v for k, v in overrides.items() if v is not None}})


def _load_model(checkpoint):
    from train_model.calibrate_am import load_sidecar
    from vqvae.checkpoint import load_checkpoint

    return load_checkpoint(checkpoint), load_sidecar(checkpoint)


def _dump_outputs(args, record, tile, result):
    from io_utils.png_export import (map_image, mask_image, normalised_preview, overlay_image, panel_image,
                                     save_image, tile_image)

    stem = Path(record.path).stem
    overlay = overlay_image(tile, record.boxes, result.boxes)
    if args.dump_maps:
        out = Path(args.dump_maps)
        save_image(tile_image(result.reconstruction), out / f"{stem}_recon.png")
        save_image(map_image(result.maps.sm), out / f"{stem}_sm.png")
        save_image(map_image(result.maps.am), out / f"{stem}_am.png")
        save_image(mask_image(result.amap), out / f"{stem}_amap.png")
        save_image(overlay, out / f"{stem}_overlay.png")
    if args.dump_panels:
        panel = panel_image([
            tile_image(tile),
            tile_image(result.reconstruction),
            normalised_preview(result.maps.am),
            normalised_preview(result.maps.sm),
            tile_image(result.amap.astype(float)),
            overlay,
        ])
        save_image(panel, Path(args.dump_panels) / f"{stem}_panel.png")


def cmd_detect(args):
    from detect_eval.run_detection import detect_records
    from io_utils.detection_file import DetectionFile, record_for, save_detections
    from io_utils.manifest import load_manifest, load_tiles
    from io_utils.workers import configure_torch_threads

    settings = _detection_settings(args)
    state, normalizer = _load_model(args.checkpoint)
    manifest = load_manifest(args.data)
    tiles, records = load_tiles(manifest, Path(args.data).parent, args.split)

    configure_torch_threads()
    results = detect_records(state, normalizer, tiles, settings)

    detections = DetectionFile(records=[record_for(rec.path, res.boxes) for rec, res in zip(records, results)])
    save_detections(detections, args.out)
    if args.dump_maps or args.dump_panels:
        for rec, tile, res in zip(records, tiles, results):
            _dump_outputs(args, rec, tile, res)

    n_boxes = sum(len(r.boxes) for r in results)
    print(f"Detected {n_boxes} boxes over {len(results)} {args.split} tiles -> {args.out}")
    return 0


def cmd_eval(args):
    from detect_eval.match_detections import aggregate, match_detections, score
    from io_utils.detection_file import check_references, load_detections
    from io_utils.manifest import load_manifest

    detections = load_detections(args.detections)
    manifest = load_manifest(args.truth)
    check_references(detections, (r.path for r in manifest.records))

    predicted = detections.by_image()
    truth = manifest.by_path()
    if args.split:
        images = [r.path for r in manifest.split(args.split)]
        skipped = [img for img in predicted if truth[img].split != args.split]
        if skipped:
            logger.warning(f"ignoring detections for {len(skipped)} image(s) outside split {args.split}")
    else:
        images = [r.image for r in detections.records]

    results = [match_detections(predicted.get(img, []), truth[img].boxes, args.iou) for img in images]
    report = score(aggregate(results))
    logger.info(f"eval over {len(images)} images at IoU {args.iou}: {report.to_dict()}")
    print(json.dumps(report.to_dict(), indent=4, sort_keys=True))
    return 0


def cmd_sweep(args):
    from detect_eval.sweep_thresholds import parse_grid, sweep_thresholds
    from io_utils.config_files import write_json
    from io_utils.manifest import load_manifest, load_tiles
    from io_utils.workers import configure_torch_threads

    grid_sm = parse_grid(args.grid_sm)
    grid_am = parse_grid(args.grid_am)
    settings = _detection_settings(args)
    state, normalizer = _load_model(args.checkpoint)
    manifest = load_manifest(args.data)
    tiles, records = load_tiles(manifest, Path(args.data).parent, args.split)

    configure_torch_threads()
    result = sweep_thresholds(state, normalizer, tiles, [r.boxes for r in records], grid_sm, grid_am,
                              settings, args.iou)
    if args.out:
        write_json(result.to_dict(), args.out)
    best = {"lambda_sm": result.lambda_sm, "lambda_am": result.lambda_am, "report": result.report.to_dict()}
    print(json.dumps(best, indent=4, sort_keys=True))
    return 0


def cmd_bench(args):
    from io_utils.config_files import write_json

    workdir = Path(args.workdir)
    data_dir = workdir / "data"
    manifest = data_dir / "manifest.json"
    checkpoint = workdir / "model.vqad"
    sweep_out = workdir / "sweep.json"
    detections = workdir / "detections.json"
    log_args = ["--log-file", args.log_file] if args.log_file else []
    pythonpath = os.pathsep.join(p for p in (SRC_DIR, os.environ.get("PYTHONPATH")) if p)
    stage_env = {**os.environ, "PYTHONPATH": pythonpath}

    # 1) Generate the synthetic dataset
    subprocess.run([
        sys.executable, "-m", "synth_scenes.gen_dataset", *log_args,
        "--params", args.params,
        "--out", str(data_dir)
    ], check=True, env=stage_env)

    # 2) Train on the normal-only train split
    subprocess.run([
        sys.executable, "-m", "train_model.run_training", *log_args,
        "--data", str(manifest),
        "--config", args.config,
        "--out", str(checkpoint)
    ], check=True, env=stage_env)

    # 3) Pick thresholds on val
    subprocess.run([
        sys.executable, MAIN_SCRIPT, *log_args, "sweep",
        "--checkpoint", str(checkpoint),
        "--data", str(manifest),
        "--split", "val",
        "--grid-sm", args.grid_sm,
        "--grid-am", args.grid_am,
        "--iou", str(args.iou),
        "--out", str(sweep_out)
    ], check=True, stdout=subprocess.DEVNULL)
    with open(sweep_out, "r", encoding="utf-8") as f:
        sweep = json.load(f)

    # 4) Detect on test with the chosen pair
    subprocess.run([
        sys.executable, MAIN_SCRIPT, *log_args, "detect",
        "--checkpoint", str(checkpoint),
        "--data", str(manifest),
        "--split", "test",
        "--lambda-sm", repr(sweep["lambda_sm"]),
        "--lambda-am", repr(sweep["lambda_am"]),
        "--out", str(detections)
    ], check=True)

    # 5) Score
    scored = subprocess.run([
        sys.executable, MAIN_SCRIPT, *log_args, "eval",
        "--detections", str(detections),
        "--truth", str(manifest),
        "--split", "test",
        "--iou", str(args.iou)
    ], check=True, capture_output=True, text=True)
    test_report = json.loads(scored.stdout)

    report = {
        "lambda_sm": sweep["lambda_sm"],
        "lambda_am": sweep["lambda_am"],
        "iou_threshold": args.iou,
        "val": sweep["report"],
        "test": test_report,
    }
    write_json(report, workdir / "report.json")
    print("\n")
    print("Benchmark results (test split):")
    print(f"  lambda_sm: {sweep['lambda_sm']:.4f}  lambda_am: {sweep['lambda_am']:.4f}")
    print(f"  Precision: {test_report['precision']:.3f}")
    print(f"  Recall:    {test_report['recall']:.3f}")
    print(f"  F1-score:  {test_report['f1']:.3f}\n")
    return 0


# ---------------------------------------------------------------------
#                                 CLI
# ---------------------------------------------------------------------

def _add_detection_flags(p):
    p.add_argument("--checkpoint", required=True, help="Path to the trained checkpoint (its .json sidecar must sit next to it).")
    p.add_argument("--data", required=True, help="Path to the dataset manifest.json.")
    p.add_argument("--settings", help="Optional DetectionSettings JSON; flags below override it.")
    p.add_argument("--fusion", choices=["hysteresis", "pixelwise"], help="Map fusion mode (default hysteresis).")
    p.add_argument("--min-area", type=int, help="Smallest component kept as a box, in pixels (default 4).")
    p.add_argument("--connectivity", type=int, choices=[4, 8], help="Pixel connectivity (default 8).")
    p.add_argument("--selem-radius", type=int, help="AM dilation disk radius (default ceil(f / 2)).")


def build_parser():
    from synth_scenes.gen_dataset import add_gen_args
    from train_model.run_training import add_train_args

    parser = argparse.ArgumentParser(
        description="VQ-VAE anomaly detection on sea-surface tiles: generate data, train, detect, evaluate, sweep thresholds."
    )
    parser.add_argument("--log-file", help="Log file (default vqad.log, or $VQAD_LOG_FILE).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Generate a synthetic sea-surface dataset.")
    add_gen_args(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="Train on the normal-only train split and calibrate the AM.")
    add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="Write detection boxes for one split.")
    _add_detection_flags(p)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--lambda-sm", type=float, help="SM threshold.")
    p.add_argument("--lambda-am", type=float, help="AM threshold.")
    p.add_argument("--out", required=True, help="Detections JSON to write.")
    p.add_argument("--dump-maps", help="Directory for recon / SM / AM / Amap PNGs and truth-vs-predicted overlays.")
    p.add_argument("--dump-panels", help="Directory for one side-by-side panel per tile.")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="Score detections against the manifest's boxes.")
    p.add_argument("--detections", required=True)
    p.add_argument("--truth", required=True, help="Path to the dataset manifest.json.")
    p.add_argument("--iou", type=float, default=0.3, help="IoU needed for a match (default 0.3).")
    p.add_argument("--split", choices=["train", "val", "test"],
                   help="Score every record of this split; without it only images in the detections file count.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="Grid-search lambda_sm / lambda_am on a split.")
    _add_detection_flags(p)
    p.add_argument("--split", default="val", choices=["train", "val", "test"])
    p.add_argument("--grid-sm", required=True, help="a:b:n, n points over [a, b].")
    p.add_argument("--grid-am", required=True, help="a:b:n, n points over [a, b].")
    p.add_argument("--iou", type=float, default=0.3)
    p.add_argument("--out", help="Also write the full sweep result JSON here.")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="gen -> train -> sweep -> detect -> eval in one go.")
    p.add_argument("--params", required=True, help="Path to the DatasetParams JSON.")
    p.add_argument("--config", required=True, help="Path to the training config JSON.")
    p.add_argument("--workdir", required=True, help="Directory for every artifact and report.json.")
    p.add_argument("--grid-sm", default="0.05:0.5:10")
    p.add_argument("--grid-am", default="0.5:3.0:11")
    p.add_argument("--iou", type=float, default=0.3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_file)
    logger.info(f"vqad {args.command}: {vars(args) | {'func': args.func.__name__}}")
    return run_stage(args.command, args.func, args)


if __name__ == "__main__":
    sys.exit(main())
