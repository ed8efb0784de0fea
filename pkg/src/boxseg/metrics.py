"""Thresholded Dice / IoU and split-level evaluation."""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import kernels
from .errors import ConfigError, DimensionError

THRESHOLD = 0.5
METRIC_FIELDS = ["split", "mode", "dice", "iou", "n"]


def _binary_pair(pred, gt, threshold):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return pred >= threshold, gt != 0


def counts(pred, gt, threshold=THRESHOLD):
    """(intersection, |pred|, |gt|) after binarizing ``pred`` at ``threshold``."""
    p, g = _binary_pair(pred, gt, threshold)
    if p.ndim != 2:
        raise DimensionError(f"expected 2-D masks, got shape {p.shape}")
    c = kernels.overlap_counts(
        np.ascontiguousarray(p[None], dtype=np.uint8), np.ascontiguousarray(g[None], dtype=np.uint8)
    )
    return tuple(int(v) for v in np.asarray(c)[0])


def dice_from_counts(inter, n_pred, n_gt):
    if n_pred + n_gt == 0:
        return 1.0
    return 2 * inter / (n_pred + n_gt)


def iou_from_counts(inter, n_pred, n_gt):
    union = n_pred + n_gt - inter
    if union == 0:
        return 1.0
    return inter / union


def dice_metric(pred, gt, threshold=THRESHOLD):
    return dice_from_counts(*counts(pred, gt, threshold))


def iou_metric(pred, gt, threshold=THRESHOLD):
    return iou_from_counts(*counts(pred, gt, threshold))


@dataclass
class MetricRow:
    dataset_split: str
    mode: str
    dice: float
    iou: float
    n_images: int

    def as_csv_row(self):
        return {
            "split": self.dataset_split,
            "mode": self.mode,
            "dice": f"{self.dice:.6f}",
            "iou": f"{self.iou:.6f}",
            "n": self.n_images,
        }


def evaluate_counts(state, dataset, batch_size=32):
    """Per-image overlap counts of the model's predictions on ``dataset``."""
    from .trainer import infer_batch

    missing = [s.id for s in dataset if s.gt_mask is None]
    if missing:
        raise ConfigError(f"{len(missing)} samples have no ground-truth mask (e.g. {missing[0]})")
    per_image = {}
    # group by size so each group is one batched forward
    groups = {}
    for s in dataset:
        groups.setdefault(tuple(s.size), []).append(s)
    for size, samples in groups.items():
        for i in range(0, len(samples), batch_size):
            chunk = samples[i : i + batch_size]
            images = torch.from_numpy(np.stack([s.image for s in chunk]).astype(np.float32))
            probs = infer_batch(images, state, size).cpu().numpy()
            pred = np.ascontiguousarray(probs >= THRESHOLD, dtype=np.uint8)
            gt = np.ascontiguousarray(np.stack([s.gt_mask for s in chunk]) != 0, dtype=np.uint8)
            for s, c in zip(chunk, np.asarray(kernels.overlap_counts(pred, gt))):
                per_image[s.id] = tuple(int(v) for v in c)
    return per_image


def summarize(per_image, split="test", mode=""):
    ids = sorted(per_image)
    dice = float(np.mean([dice_from_counts(*per_image[i]) for i in ids])) if ids else float("nan")
    iou = float(np.mean([iou_from_counts(*per_image[i]) for i in ids])) if ids else float("nan")
    return MetricRow(split, mode, dice, iou, len(ids))


def evaluate(state, dataset, split="test", mode=None):
    """Mean per-image Dice and IoU at threshold 0.5."""
    if mode is None:
        mode = getattr(getattr(state, "cfg", None), "mode", "")
    return summarize(evaluate_counts(state, dataset), split, mode)


def write_metric_csv(path, rows):
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_csv_row())
