"""Segmentation losses over probability maps."""

from __future__ import annotations

from enum import Enum

import torch

from ..errors import ShapeMismatchError

BCE_CLAMP_EPS = 1e-7
DICE_SMOOTH = 1.0


class LossKind(str, Enum):
    BCE = "bce"
    DICE = "dice"
    BCE_PLUS_DICE = "bce_plus_dice"


def _bce(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    p = pred.clamp(BCE_CLAMP_EPS, 1.0 - BCE_CLAMP_EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()


def _dice(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    inter = (pred * target).sum()
    return 1.0 - (2.0 * inter + DICE_SMOOTH) / (pred.sum() + target.sum() + DICE_SMOOTH)


def segmentation_loss(pred, target, kind: LossKind = LossKind.BCE_PLUS_DICE) -> torch.Tensor:
    """Scalar loss between predicted probabilities and {0, 1} targets.

    BCE is the mean binary cross-entropy with eps-clamped probabilities;
    DICE is 1 - (2*sum(p*t) + 1) / (sum(p) + sum(t) + 1) over the whole
    batch; BCE_PLUS_DICE is their sum. Accepts torch tensors (gradients
    flow) or array-likes; returns a 0-d tensor.
    """
    pred_t = torch.as_tensor(pred)
    target_t = torch.as_tensor(target, dtype=pred_t.dtype)
    if pred_t.shape != target_t.shape:
        raise ShapeMismatchError(f"pred shape {tuple(pred_t.shape)} != target shape {tuple(target_t.shape)}")
    kind = LossKind(kind)
    if kind is LossKind.BCE:
        return _bce(pred_t, target_t)
    if kind is LossKind.DICE:
        return _dice(pred_t, target_t)
    return _bce(pred_t, target_t) + _dice(pred_t, target_t)
