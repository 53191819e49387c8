"""
7) Match detections to ground truth and score them
--------------------------------------------------

Counting semantics behind the F1 / recall / precision columns.

INPUTS
 - predicted boxes and ground-truth boxes per image ({x, y, w, h} in pixels)
 - IoU threshold (0.3 by default)

OUTPUTS
 - MatchResult per image (tp, fp, fn, matched pairs)
 - EvalReport over a whole split (precision, recall, f1 + counts)

APPROACH
 1. IoU of every pred/gt pair on pixel extents
 2. Greedy one-to-one matching in descending IoU; equal IoUs are ordered by
    box geometry so the outcome doesn't depend on list order
 3. A pair counts iff IoU >= threshold
 4. Sum counts over images, then P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R),
    each 0 when its denominator is 0
"""

from dataclasses import dataclass, field

from dataclasses_json import dataclass_json

DEFAULT_IOU = 0.3


def _xywh(box):
    if hasattr(box, "x"):
        return box.x, box.y, box.w, box.h
    if isinstance(box, dict):
        return box["x"], box["y"], box["w"], box["h"]
    x, y, w, h = box[:4]
    return x, y, w, h


def iou(a, b) -> float:
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    iw = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass_json
@dataclass
class MatchResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    pairs: list = field(default_factory=list)


@dataclass_json
@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_precision_recall(cls, precision: float, recall: float) -> "EvalReport":
        return cls(precision=precision, recall=recall, f1=f1_score(precision, recall))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def match_detections(pred, gt, iou_threshold: float = DEFAULT_IOU) -> MatchResult:
    pred, gt = list(pred), list(gt)
    candidates = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            overlap = iou(p, g)
            if overlap >= iou_threshold and overlap > 0:
                candidates.append((-overlap, _xywh(p), _xywh(g), i, j))
    candidates.sort(key=lambda c: c[:3])

    used_pred, used_gt, pairs = set(), set(), []
    for neg_iou, _, _, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        pairs.append((i, j, -neg_iou))

    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(pred) - tp, fn=len(gt) - tp, pairs=pairs)


def aggregate(results) -> MatchResult:
    """Sum of counts; pairs are not carried across images."""
    total = MatchResult()
    for r in results:
        total.tp += r.tp
        total.fp += r.fp
        total.fn += r.fn
    return total


def score(agg: MatchResult) -> EvalReport:
    tp, fp, fn = agg.tp, agg.fp, agg.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return EvalReport(precision=precision, recall=recall, f1=f1_score(precision, recall), tp=tp, fp=fp, fn=fn)
