"""Box-mask supervision losses.

All functions take probability tensors shaped (H, W) or (N, H, W) and
reduce to a scalar: a per-image value first, then the mean over the batch.
"""
from dataclasses import dataclass

import torch

from .errors import DimensionError
from .m2b import m2b_torch

BCE_EPS = 1e-7
DICE_SMOOTH = 1.0


def _check(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def _batched(x):
    return x.unsqueeze(0) if x.dim() == 2 else x


def bce_loss(pred, target):
    _check(pred, target)
    p = _batched(pred).clamp(BCE_EPS, 1 - BCE_EPS)
    t = _batched(target).to(p.dtype)
    per_pixel = -(t * torch.log(p) + (1 - t) * torch.log(1 - p))
    return per_pixel.flatten(1).mean(dim=1).mean()


def dice_loss(pred, target):
    _check(pred, target)
    p = _batched(pred).flatten(1)
    t = _batched(target).to(p.dtype).flatten(1)
    inter = (p * t).sum(dim=1)
    score = (2 * inter + DICE_SMOOTH) / (p.sum(dim=1) + t.sum(dim=1) + DICE_SMOOTH)
    return (1 - score).mean()


def sum_loss(t1, t2, b):
    """Average BCE plus average Dice of two box-like masks against ``b``."""
    _check(t1, b)
    _check(t2, b)
    return (bce_loss(t1, b) + bce_loss(t2, b)) / 2 + (dice_loss(t1, b) + dice_loss(t2, b)) / 2


def sc_loss_per_image(p1, p2, b):
    """Mean |p1 - p2| over box pixels per image, and a flag for empty boxes.

    Images whose box mask is empty get 0.
    """
    _check(p1, b)
    _check(p2, b)
    p1, p2 = _batched(p1), _batched(p2)
    inside = _batched(b).to(p1.dtype).flatten(1)
    diff = (p1 - p2).abs().flatten(1)
    count = inside.sum(dim=1)
    empty = count == 0
    value = (diff * inside).sum(dim=1) / count.clamp(min=1)
    return value, empty


def sc_loss(p1, p2, b):
    value, _ = sc_loss_per_image(p1, p2, b)
    return value.mean()


@dataclass
class LossReport:
    bce: torch.Tensor
    dice: torch.Tensor
    sum_loss: torch.Tensor
    sc: torch.Tensor
    total: torch.Tensor
    empty_boxes: int = 0

    def as_floats(self):
        return {
            "bce": self.bce.item(),
            "dice": self.dice.item(),
            "sum": self.sum_loss.item(),
            "sc": self.sc.item(),
            "total": self.total.item(),
        }


def total_loss(p1, p2, b, use_sc=True):
    """Weak-supervision objective on two aligned predictions.

    M2B is applied to both predictions for the box term; the consistency
    term compares the raw predictions. ``use_sc=False`` drops the
    consistency term (it is then reported as 0).
    """
    _check(p1, b)
    _check(p2, b)
    t1, t2 = m2b_torch(p1), m2b_torch(p2)
    bce = (bce_loss(t1, b) + bce_loss(t2, b)) / 2
    dice = (dice_loss(t1, b) + dice_loss(t2, b)) / 2
    s = bce + dice
    sc_values, empty = sc_loss_per_image(p1, p2, b)
    if use_sc:
        sc = sc_values.mean()
    else:
        sc = torch.zeros((), dtype=s.dtype, device=s.device)
    return LossReport(bce, dice, s, sc, s + sc, int(empty.sum()))


def direct_loss(pred, target):
    """BCE + Dice straight against a dense target (box mask or ground truth)."""
    bce = bce_loss(pred, target)
    dice = dice_loss(pred, target)
    s = bce + dice
    zero = torch.zeros((), dtype=s.dtype, device=s.device)
    return LossReport(bce, dice, s, zero, s + zero)
