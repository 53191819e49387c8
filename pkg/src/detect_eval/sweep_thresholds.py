"""
8) Pick lambda_sm / lambda_am on a validation split
---------------------------------------------------

INPUTS
 - trained VQVAE + AmNormalizer
 - validation tiles and their ground-truth boxes
 - grids for lambda_sm and lambda_am ("a:b:n" on the command line:
   n points linearly spaced over [a, b], both ends included)

OUTPUTS
 - SweepResult: best (lambda_sm, lambda_am) and its EvalReport

APPROACH
 1. Anomaly maps once per validation tile
 2. For every grid pair: threshold + fuse + boxes, match at the IoU
    threshold, sum the counts over the split
 3. Best pair maximises F1; ties go to higher precision, then lower
    lambda_sm, then lower lambda_am
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from dataclasses_json import dataclass_json

from detect_eval.match_detections import DEFAULT_IOU, EvalReport, aggregate, match_detections, score
from detect_eval.run_detection import DetectionSettings, compute_maps, threshold_maps
from io_utils.errors import ConfigurationError, DataError
from io_utils.workers import ordered_map

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class SweepResult:
    lambda_sm: float
    lambda_am: float
    report: EvalReport
    # every evaluated pair as [lambda_sm, lambda_am, f1]
    table: list = field(default_factory=list)


def parse_grid(text: str) -> list:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"grid must look like a:b:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"grid must look like a:b:n, got {text!r}")
    if n < 1:
        raise ConfigurationError(f"grid {text!r} needs n >= 1 points")
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigurationError(f"grid {text!r} has non-finite bounds")
    if n == 1:
        return [lo]
    return [float(v) for v in np.linspace(lo, hi, n)]


def _clean_grid(values, name: str) -> list:
    values = sorted({float(v) for v in values})
    if not values:
        raise ConfigurationError(f"{name} grid is empty")
    if not all(math.isfinite(v) for v in values):
        raise ConfigurationError(f"{name} grid has non-finite values")
    return values


def _rank(report: EvalReport, lambda_sm: float, lambda_am: float):
    return (report.f1, report.precision, -lambda_sm, -lambda_am)


def sweep_maps(maps, truths, grid_sm, grid_am, settings: DetectionSettings, iou_threshold: float = DEFAULT_IOU) -> SweepResult:
    """
    Grid search on precomputed AnomalyMaps.
    maps[i] and truths[i] belong to the same validation tile.
    """
    grid_sm = _clean_grid(grid_sm, "lambda_sm")
    grid_am = _clean_grid(grid_am, "lambda_am")
    maps, truths = list(maps), list(truths)
    if not maps:
        raise DataError("validation set is empty")
    if len(maps) != len(truths):
        raise DataError(f"{len(maps)} map pairs but {len(truths)} ground-truth lists")

    pairs = [(ls, la) for ls in grid_sm for la in grid_am]

    def _evaluate(pair):
        ls, la = pair
        results = []
        for m, gt in zip(maps, truths):
            _, boxes = threshold_maps(m, settings, ls, la)
            results.append(match_detections(boxes, gt, iou_threshold))
        return score(aggregate(results))

    reports = ordered_map(_evaluate, pairs)

    best = None
    table = []
    for (ls, la), report in zip(pairs, reports):
        table.append([ls, la, report.f1])
        if best is None or _rank(report, ls, la) > _rank(best[2], best[0], best[1]):
            best = (ls, la, report)

    ls, la, report = best
    logger.info(f"best pair lambda_sm={ls} lambda_am={la}: f1={report.f1:.4f} "
                f"P={report.precision:.4f} R={report.recall:.4f} over {len(pairs)} pairs")
    return SweepResult(lambda_sm=ls, lambda_am=la, report=report, table=table)


def sweep_thresholds(state, normalizer, tiles, truths, grid_sm, grid_am,
                     settings: DetectionSettings | None = None, iou_threshold: float = DEFAULT_IOU) -> SweepResult:
    settings = settings or DetectionSettings()
    _clean_grid(grid_sm, "lambda_sm")
    _clean_grid(grid_am, "lambda_am")
    if len(tiles) == 0:
        raise DataError("validation set is empty")
    maps = [m for _, m in compute_maps(state, normalizer, tiles, settings)]
    return sweep_maps(maps, truths, grid_sm, grid_am, settings, iou_threshold)
