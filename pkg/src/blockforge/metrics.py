"""Label-map comparison metrics.

All metrics treat void (255) as "not evaluated", never as a class: a pixel
void in either map is excluded from the confusion matrix, agreement, and
error rates. The class-balanced error rate is the mean per-class Jaccard
distance

    error = (1/K') * sum_c (FP_c + FN_c) / (TP_c + FP_c + FN_c) = 1 - mIOU

averaged over the K' classes present in ground truth or prediction
(classes absent from both would contribute 0/0 and are excluded).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    EmptyEvaluationError,
    NoQualifyingRegionsError,
)
from .raster import VOID, LabelMap, Palette, connected_components


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts; entry (g, p) = pixels of ground-truth class g predicted
    as class p, over mutually non-void pixels."""

    counts: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.counts, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"confusion matrix must be square, got {a.shape}")
        if (a < 0).any():
            raise ValueError("confusion counts must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "counts", a)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.k != other.k:
            raise DimensionError("cannot sum confusion matrices of different K")
        return ConfusionMatrix(self.counts + other.counts)

    def evaluated_classes(self) -> np.ndarray:
        """Classes present in ground truth or prediction."""
        return np.flatnonzero(self.counts.sum(axis=0) + self.counts.sum(axis=1))


def confusion(pred: LabelMap, gt: LabelMap, palette: Palette) -> ConfusionMatrix:
    """Tally the K x K confusion matrix over mutually non-void pixels."""
    if pred.labels.shape != gt.labels.shape:
        raise DimensionError(
            f"prediction {pred.labels.shape} and ground truth {gt.labels.shape} differ"
        )
    pred.validate_against(palette)
    gt.validate_against(palette)
    k = palette.k
    valid = (pred.labels != VOID) & (gt.labels != VOID)
    g = gt.labels[valid].astype(np.int64)
    p = pred.labels[valid].astype(np.int64)
    counts = np.bincount(g * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts)


def per_class_iou(cm: ConfusionMatrix) -> dict[int, float]:
    """IOU (TP / (TP+FP+FN)) per evaluated class."""
    tp = np.diag(cm.counts)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    out = {}
    for c in cm.evaluated_classes():
        out[int(c)] = float(tp[c] / (tp[c] + fp[c] + fn[c]))
    return out


def miou(cm: ConfusionMatrix) -> float:
    """Mean IOU over classes present in ground truth or prediction."""
    ious = per_class_iou(cm)
    if not ious:
        raise EmptyEvaluationError("no class present in either map")
    vals = np.fromiter(ious.values(), dtype=np.float64)
    return float(vals.sum() / len(vals))


def class_balanced_error(cm: ConfusionMatrix) -> float:
    """Class-balanced Jaccard distance: mean over evaluated classes of
    (FP + FN) / (TP + FP + FN). Equals 1 - miou."""
    tp = np.diag(cm.counts)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    classes = cm.evaluated_classes()
    if classes.size == 0:
        raise EmptyEvaluationError("no class present in either map")
    errs = (fp[classes] + fn[classes]) / (tp[classes] + fp[classes] + fn[classes])
    return float(errs.sum() / errs.size)


def pixel_agreement(pred: LabelMap, gt: LabelMap) -> float:
    """Fraction of mutually non-void pixels with equal labels."""
    if pred.labels.shape != gt.labels.shape:
        raise DimensionError("maps differ in shape")
    valid = (pred.labels != VOID) & (gt.labels != VOID)
    n = int(valid.sum())
    if n == 0:
        raise EmptyEvaluationError("no mutually non-void pixels")
    return float((pred.labels[valid] == gt.labels[valid]).sum() / n)


def small_region_confusion(
    pred: LabelMap,
    gt: LabelMap,
    palette: Palette,
    area_threshold_fraction: float = 0.005,
) -> ConfusionMatrix:
    """Confusion restricted to pixels of ground-truth components smaller
    than the given fraction of the image."""
    if pred.labels.shape != gt.labels.shape:
        raise DimensionError("maps differ in shape")
    seg, n = connected_components(gt)
    if n == 0:
        raise NoQualifyingRegionsError("ground truth has no segments")
    areas = np.bincount(seg.ravel(), minlength=n + 1)
    limit = area_threshold_fraction * gt.labels.size
    small_ids = np.flatnonzero(areas < limit)
    small_ids = small_ids[small_ids > 0]
    if small_ids.size == 0:
        raise NoQualifyingRegionsError(
            f"no ground-truth component below {area_threshold_fraction:.3%} of the image"
        )
    keep = np.isin(seg, small_ids)
    restricted_gt = LabelMap(np.where(keep, gt.labels, VOID).astype(np.uint8))
    restricted_pred = LabelMap(np.where(keep, pred.labels, VOID).astype(np.uint8))
    return confusion(restricted_pred, restricted_gt, palette)


def small_region_error(
    pred: LabelMap,
    gt: LabelMap,
    palette: Palette,
    area_threshold_fraction: float = 0.005,
) -> float:
    """Class-balanced error over pixels of small ground-truth components."""
    return class_balanced_error(
        small_region_confusion(pred, gt, palette, area_threshold_fraction)
    )


def segment_count_ratio(submission: LabelMap, gt: LabelMap) -> float:
    """Ratio of submission segment count to ground-truth segment count."""
    if submission.labels.shape != gt.labels.shape:
        raise DimensionError("maps differ in shape")
    gt_n = connected_components(gt)[1]
    if gt_n == 0:
        raise EmptyEvaluationError("ground truth has zero segments")
    return connected_components(submission)[1] / gt_n


@dataclass(frozen=True)
class MetricReport:
    miou: float
    class_balanced_error: float
    pixel_agreement: float
    per_class_iou: dict[int, float]
    small_region_error: float | None
    segment_counts: tuple[int, int]  # (pred, gt)

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "class_balanced_error": self.class_balanced_error,
            "pixel_agreement": self.pixel_agreement,
            "per_class_iou": {str(c): v for c, v in self.per_class_iou.items()},
            "small_region_error": self.small_region_error,
            "segment_counts": {"pred": self.segment_counts[0], "gt": self.segment_counts[1]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def evaluate_pair(
    pred: LabelMap,
    gt: LabelMap,
    palette: Palette,
    small_region_threshold: float = 0.005,
) -> MetricReport:
    """Full metric report for one prediction / ground-truth pair."""
    cm = confusion(pred, gt, palette)
    try:
        sre = small_region_error(pred, gt, palette, small_region_threshold)
    except NoQualifyingRegionsError:
        sre = None
    return MetricReport(
        miou=miou(cm),
        class_balanced_error=class_balanced_error(cm),
        pixel_agreement=pixel_agreement(pred, gt),
        per_class_iou=per_class_iou(cm),
        small_region_error=sre,
        segment_counts=(connected_components(pred)[1], connected_components(gt)[1]),
    )
