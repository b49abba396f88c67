"""Set-prediction losses with deep supervision.

Per prediction set (one per decoder layer plus the pre-decoder set):

    cls:  weighted cross entropy over all queries; unmatched queries target
          the no-object class (index C) whose weight is ``no_object``
    bce:  binary cross entropy of matched mask logits, mean over samples,
          then mean over matched pairs
    dice: smoothed Dice of matched masks, mean over matched pairs

The total is ``sum over sets of (w_cls*cls + w_bce*bce + w_dice*dice)``, with
matching recomputed per set. Center-query sets (training-time guidance, see
``center_queries``) use the same recipe with their fixed GT assignment and no
no-object rows, accumulated under the ``aux_*`` keys.

All scalar terms are computed in float64, and the breakdown dict (insertion
order ``KEY_ORDER``) sums exactly to the returned total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from . import matching

KEY_ORDER = ("cls", "bce", "dice", "aux_cls", "aux_bce", "aux_dice")


@dataclass(frozen=True)
class LossWeights:
    bce: float = 5.0
    dice: float = 5.0
    cls: float = 2.0
    no_object: float = 0.1
    dice_smooth: float = 1.0


def mask_bce(mask_logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Per-row mean binary cross entropy of mask logits against 0/1 targets."""
    return F.binary_cross_entropy_with_logits(
        mask_logits, targets, reduction="none"
    ).mean(dim=-1)


def mask_dice(mask_logits: torch.Tensor, targets: torch.Tensor,
              smooth: float = 1.0) -> torch.Tensor:
    """Per-row smoothed Dice loss: 1 - (2*sum(p*y)+s) / (sum(p)+sum(y)+s)."""
    p = torch.sigmoid(mask_logits)
    numer = 2.0 * (p * targets).sum(dim=-1) + smooth
    denom = p.sum(dim=-1) + targets.sum(dim=-1) + smooth
    return 1.0 - numer / denom


def classification_loss(class_logits: torch.Tensor, targets: torch.Tensor,
                        no_object_weight: float) -> torch.Tensor:
    """Weighted CE over queries (torch's weighted mean: sum w*ce / sum w)."""
    num_classes = class_logits.shape[-1] - 1
    w = torch.ones(num_classes + 1, dtype=class_logits.dtype)
    w[num_classes] = no_object_weight
    return F.cross_entropy(class_logits, targets, weight=w)


def _set_loss(
    class_logits: torch.Tensor,
    mask_logits: torch.Tensor,
    gt_labels_t: torch.Tensor,
    gt_masks_t: torch.Tensor,
    query_idx: np.ndarray,
    gt_idx: np.ndarray,
    weights: LossWeights,
    num_classes: int,
    with_no_object: bool,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    y = class_logits.double()
    m = mask_logits.double()
    if with_no_object:
        targets = torch.full((y.shape[0],), num_classes, dtype=torch.long)
        if len(query_idx):
            targets[torch.as_tensor(query_idx)] = gt_labels_t[torch.as_tensor(gt_idx)]
    else:
        targets = gt_labels_t[torch.as_tensor(gt_idx)]
    cls = classification_loss(y, targets, weights.no_object)

    if len(query_idx):
        mq = m[torch.as_tensor(query_idx)]
        tg = gt_masks_t[torch.as_tensor(gt_idx)]
        bce = mask_bce(mq, tg).mean()
        dice = mask_dice(mq, tg, weights.dice_smooth).mean()
    else:
        zero = y.sum() * 0.0
        bce, dice = zero, zero.clone()
    return cls, bce, dice


def spotting_loss(
    learn_sets: Sequence[tuple[torch.Tensor, torch.Tensor]],
    gt_labels: np.ndarray,
    gt_masks: np.ndarray,
    weights: LossWeights,
    num_classes: int,
    center_sets: Sequence[tuple[torch.Tensor, torch.Tensor]] | None = None,
    center_gt_indices: np.ndarray | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Deeply supervised loss over all prediction sets.

    ``learn_sets``/``center_sets`` hold (class_logits, mask_logits) per set,
    pre-decoder first. Matching runs fresh per learnable set; center rows are
    bound to ``center_gt_indices`` once. Returns the scalar total and a
    breakdown whose values sum exactly to it.
    """
    gt_labels = np.asarray(gt_labels, dtype=np.int64)
    if np.any(gt_labels < 0) or np.any(gt_labels >= num_classes):
        raise ValueError("gt labels must lie in [0, num_classes)")
    gt_labels_t = torch.as_tensor(gt_labels)
    gt_masks_t = torch.as_tensor(np.asarray(gt_masks, dtype=np.float64))

    parts = {k: torch.zeros((), dtype=torch.float64) for k in KEY_ORDER}
    for class_logits, mask_logits in learn_sets:
        if len(gt_labels):
            result = matching.match_predictions(
                class_logits, mask_logits, gt_labels, gt_masks, weights
            )
            q_idx, g_idx = result.query_indices, result.gt_indices
        else:
            q_idx = g_idx = np.empty(0, dtype=np.int64)
        cls, bce, dice = _set_loss(
            class_logits, mask_logits, gt_labels_t, gt_masks_t,
            q_idx, g_idx, weights, num_classes, with_no_object=True,
        )
        parts["cls"] = parts["cls"] + weights.cls * cls
        parts["bce"] = parts["bce"] + weights.bce * bce
        parts["dice"] = parts["dice"] + weights.dice * dice

    if center_sets:
        if center_gt_indices is None:
            raise ValueError("center sets given without their GT assignment")
        c_idx = np.asarray(center_gt_indices, dtype=np.int64)
        q_idx = np.arange(len(c_idx), dtype=np.int64)
        for class_logits, mask_logits in center_sets:
            if class_logits.shape[0] != len(c_idx):
                raise ValueError("center prediction rows must match the assignment")
            cls, bce, dice = _set_loss(
                class_logits, mask_logits, gt_labels_t, gt_masks_t,
                q_idx, c_idx, weights, num_classes, with_no_object=False,
            )
            parts["aux_cls"] = parts["aux_cls"] + weights.cls * cls
            parts["aux_bce"] = parts["aux_bce"] + weights.bce * bce
            parts["aux_dice"] = parts["aux_dice"] + weights.dice * dice

    total = torch.zeros((), dtype=torch.float64)
    breakdown: dict[str, float] = {}
    for k in KEY_ORDER:
        total = total + parts[k]
        breakdown[k] = float(parts[k].item())
    return total, breakdown
