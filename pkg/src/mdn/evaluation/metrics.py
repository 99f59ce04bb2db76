"""Confusion counts and derived segmentation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import BinaryMask, DatasetManifest, MetricsReport
from ..errors import DimensionMismatchError, EmptySplitError
from ..fileio import load_image, load_mask
from ..segnet.inference import predict_mask


def confusion_counts(pred: BinaryMask, gt: BinaryMask) -> tuple[int, int, int, int]:
    """Pixel-wise (tp, fp, fn, tn) between a predicted and ground-truth mask."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatchError(
            f"pred is {pred.width}x{pred.height}, gt is {gt.width}x{gt.height}"
        )
    p = pred.values.astype(bool)
    g = gt.values.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return tp, fp, fn, tn


def metrics(counts: tuple[int, int, int, int]) -> MetricsReport:
    """Derive IoU/F1/Precision/Recall/accuracy from (tp, fp, fn, tn)."""
    tp, fp, fn, tn = counts
    return MetricsReport.from_counts(tp, fp, fn, tn)


@dataclass(frozen=True)
class EvaluationResult:
    """Micro-averaged headline metrics plus per-image breakdowns.

    ``micro`` derives the metrics once from confusion counts summed over all
    images; ``macro`` is the plain mean of each per-image metric.
    """

    split: str
    micro: MetricsReport
    per_image: tuple
    macro: dict

    @property
    def n_images(self) -> int:
        return len(self.per_image)


def aggregate(per_image: list[tuple[str, MetricsReport]], split: str) -> EvaluationResult:
    """Combine per-image reports into micro and macro summaries."""
    if not per_image:
        raise EmptySplitError(f"no images to aggregate for split '{split}'")
    tp = sum(r.tp for _, r in per_image)
    fp = sum(r.fp for _, r in per_image)
    fn = sum(r.fn for _, r in per_image)
    tn = sum(r.tn for _, r in per_image)
    micro = MetricsReport.from_counts(tp, fp, fn, tn)
    names = ("iou", "f1", "precision", "recall", "accuracy")
    macro = {name: float(np.mean([getattr(r, name) for _, r in per_image])) for name in names}
    return EvaluationResult(split=split, micro=micro, per_image=tuple(per_image), macro=macro)


def evaluate(model, manifest: DatasetManifest, split: str = "test",
             threshold: float = 0.5, mode: str = "tile",
             patch_size: int | None = None) -> EvaluationResult:
    """Predict masks for every image in a split and score them.

    Confusion counts are summed over all images before the headline metrics
    are derived (micro-averaging); per-image reports ride along.
    """
    entries = manifest.for_split(split)
    if not entries:
        raise EmptySplitError(f"manifest has no '{split}' entries")
    per_image = []
    for entry in entries:
        image = load_image(entry.image_path, scale_um_per_px=manifest.scale_um_per_px)
        gt = load_mask(entry.mask_path)
        pred = predict_mask(model, image, threshold=threshold, mode=mode, patch_size=patch_size)
        per_image.append((entry.image_path, metrics(confusion_counts(pred, gt))))
    return aggregate(per_image, split)
