"""Detection and classification metrics: IoU, average precision, mAP,
balanced accuracy, and fixation-to-AOI mapping.

Average precision uses score-sorted greedy matching (each ground-truth box
claimed at most once, IoU >= alpha required) and all-point interpolation of
the precision-recall curve. Classes with no ground truth and no predictions
are undefined and excluded from means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scene import BACKGROUND, BoundingBox

COCO_ALPHAS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix0 = max(a.x_min, b.x_min)
    iy0 = max(a.y_min, b.y_min)
    ix1 = min(a.x_max, b.x_max)
    iy1 = min(a.y_max, b.y_max)
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


@dataclass(eq=False)
class ScoredBox:
    box: BoundingBox
    label: str
    score: float


@dataclass(eq=False)
class LabeledBox:
    box: BoundingBox
    label: str


def match_greedy(pred_boxes: list[BoundingBox], gt_boxes: list[BoundingBox],
                 alpha: float) -> list[int | None]:
    """For predictions already sorted by score, the greedy match: each entry
    is the claimed gt index or None. A gt box is claimed at most once; a
    match needs IoU >= alpha; ties go to the lowest gt index."""
    taken = [False] * len(gt_boxes)
    out: list[int | None] = []
    for pb in pred_boxes:
        best_j = None
        best_iou = 0.0
        for j, gb in enumerate(gt_boxes):
            if taken[j]:
                continue
            v = iou(pb, gb)
            if v >= alpha and v > best_iou:
                best_iou = v
                best_j = j
        if best_j is not None:
            taken[best_j] = True
        out.append(best_j)
    return out


def average_precision(preds: list[ScoredBox], gts: list[LabeledBox],
                      class_label: str, alpha: float) -> float | None:
    """AP@alpha for one class; None when the class has no ground truth and
    no predictions (undefined, excluded from means)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    cls_preds = [p for p in preds if p.label == class_label]
    cls_gts = [g for g in gts if g.label == class_label]
    if not cls_gts:
        return 0.0 if cls_preds else None
    if not cls_preds:
        return 0.0
    order = sorted(range(len(cls_preds)), key=lambda i: (-cls_preds[i].score, i))
    matched = match_greedy([cls_preds[i].box for i in order],
                           [g.box for g in cls_gts], alpha)
    n_gt = len(cls_gts)
    tp = 0
    precisions: list[float] = []
    recalls: list[float] = []
    for rank, m in enumerate(matched, start=1):
        if m is not None:
            tp += 1
        precisions.append(tp / rank)
        recalls.append(tp / n_gt)
    # All-point interpolation: envelope of precision from the right, summed
    # over recall increments.
    ap = 0.0
    prev_recall = 0.0
    running_max = 0.0
    envelope = [0.0] * len(precisions)
    for i in range(len(precisions) - 1, -1, -1):
        running_max = max(running_max, precisions[i])
        envelope[i] = running_max
    for i in range(len(precisions)):
        if recalls[i] > prev_recall:
            ap += (recalls[i] - prev_recall) * envelope[i]
            prev_recall = recalls[i]
    return ap


def mean_ap(preds: list[ScoredBox], gts: list[LabeledBox],
            alphas=COCO_ALPHAS) -> dict[float, float]:
    """mAP at each alpha: mean AP over classes (union of gt and predicted
    labels, background excluded; undefined classes dropped)."""
    classes = sorted(({g.label for g in gts} | {p.label for p in preds}) - {BACKGROUND})
    if not any(g.label != BACKGROUND for g in gts):
        raise ValueError("mean AP is undefined without any ground-truth boxes")
    out: dict[float, float] = {}
    for alpha in alphas:
        values = [average_precision(preds, gts, c, alpha) for c in classes]
        defined = [v for v in values if v is not None]
        out[alpha] = sum(defined) / len(defined)
    return out


def per_class_ap(preds: list[ScoredBox], gts: list[LabeledBox],
                 alphas) -> dict[str, dict[float, float | None]]:
    classes = sorted(({g.label for g in gts} | {p.label for p in preds}) - {BACKGROUND})
    return {c: {a: average_precision(preds, gts, c, a) for a in alphas}
            for c in classes}


def balanced_accuracy(pred_labels, true_labels) -> float:
    """Mean per-class recall over classes present in the truth."""
    preds = list(pred_labels)
    truth = list(true_labels)
    if not truth or len(preds) != len(truth):
        raise ValueError("need equal-length, non-empty label sequences")
    recalls = []
    for cls in sorted(set(truth)):
        idx = [i for i, t in enumerate(truth) if t == cls]
        hit = sum(1 for i in idx if preds[i] == cls)
        recalls.append(hit / len(idx))
    return sum(recalls) / len(recalls)


def fixation_to_aoi(x: float, y: float, predictions) -> str:
    """Label of the predicted box containing the point; background if none.

    Background-labeled boxes are not AOIs and are ignored. When several
    boxes contain the point, the smallest area wins.
    """
    best_label = BACKGROUND
    best_area = None
    for item in predictions:
        if item.label == BACKGROUND:
            continue
        if item.box.contains(x, y):
            if best_area is None or item.box.area < best_area:
                best_area = item.box.area
                best_label = item.label
    return best_label


@dataclass
class MetricsReport:
    map_50: float
    map_75: float
    map_coco: float
    balanced_accuracy: float
    fixation_accuracy: float | None
    ap_per_class: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("map_50", "map_75", "map_coco", "balanced_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.fixation_accuracy is not None and not 0.0 <= self.fixation_accuracy <= 1.0:
            raise ValueError("fixation_accuracy outside [0, 1]")

    def to_record(self) -> dict:
        rec = {"map_50": self.map_50, "map_75": self.map_75,
               "map_coco": self.map_coco,
               "balanced_accuracy": self.balanced_accuracy,
               "fixation_accuracy": self.fixation_accuracy,
               "ap_per_class": {c: {str(a): v for a, v in table.items()}
                                for c, table in sorted(self.ap_per_class.items())}}
        return rec


def build_metrics_report(preds: list[ScoredBox], gts: list[LabeledBox],
                         pred_node_labels, true_node_labels,
                         fixation_outcomes) -> MetricsReport:
    """Assemble the standard report from pooled detections over a frame range.

    fixation_outcomes: iterable of (mapped_label, true_label) pairs; empty
    yields fixation_accuracy = None.
    """
    maps = mean_ap(preds, gts, COCO_ALPHAS)
    outcomes = list(fixation_outcomes)
    fix_acc = (sum(1 for m, t in outcomes if m == t) / len(outcomes)
               if outcomes else None)
    report = MetricsReport(
        map_50=maps[0.5], map_75=maps[0.75],
        map_coco=sum(maps.values()) / len(maps),
        balanced_accuracy=balanced_accuracy(pred_node_labels, true_node_labels),
        fixation_accuracy=fix_acc,
        ap_per_class=per_class_ap(preds, gts, (0.5, 0.75)))
    report.validate()
    return report
