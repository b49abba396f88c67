"""Set matching between query predictions and ground-truth symbols.

The pairwise cost of assigning query q to GT object g is

    cost[q, g] = w_bce * BCE(mask_q, mask_g)          (mean over samples)
               + w_dice * Dice(mask_q, mask_g)        (smoothed)
               + w_cls * (-prob_q[label_g])

minimized by a Hungarian solve. Among minimum-cost assignments the result is
canonical: the lexicographically smallest query tuple ordered by GT index,
computed exactly for cost matrices up to ``EXACT_LEX_LIMIT`` rows/columns
(above that, the solver's own deterministic choice stands).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

if TYPE_CHECKING:  # cost weights come in duck-typed; avoids an import cycle
    from .losses import LossWeights

#: Largest max(num_queries, num_gt) for which the lexicographic refinement runs.
EXACT_LEX_LIMIT = 32

_RTOL, _ATOL = 1e-9, 1e-12


@dataclass(frozen=True)
class MatchResult:
    """One query per GT object; ``pairs[i] == (query_for_gt_i, i)``."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    @property
    def query_indices(self) -> np.ndarray:
        return np.array([q for q, _ in self.pairs], dtype=np.int64)

    @property
    def gt_indices(self) -> np.ndarray:
        return np.array([g for _, g in self.pairs], dtype=np.int64)


@torch.no_grad()
def match_cost(class_logits: torch.Tensor, mask_logits: torch.Tensor,
               gt_labels: np.ndarray, gt_masks: np.ndarray,
               weights: "LossWeights") -> np.ndarray:
    """Dense [num_queries, num_gt] assignment cost (detached, float64)."""
    if len(gt_labels) != len(gt_masks):
        raise ValueError("gt labels and masks must align")
    prob = torch.softmax(class_logits.double(), dim=-1)
    m = mask_logits.double()
    y = torch.as_tensor(np.asarray(gt_masks, dtype=np.float64))
    n = m.shape[1]
    if y.shape[1] != n:
        raise ValueError("mask logits and gt masks must cover the same samples")

    labels = torch.as_tensor(np.asarray(gt_labels, dtype=np.int64))
    cost_cls = -prob[:, labels]

    pos = torch.nn.functional.binary_cross_entropy_with_logits(
        m, torch.ones_like(m), reduction="none"
    )
    neg = torch.nn.functional.binary_cross_entropy_with_logits(
        m, torch.zeros_like(m), reduction="none"
    )
    cost_bce = (pos @ y.T + neg @ (1.0 - y.T)) / n

    p = torch.sigmoid(m)
    s = weights.dice_smooth
    numer = 2.0 * (p @ y.T) + s
    denom = p.sum(dim=1, keepdim=True) + y.sum(dim=1) + s
    cost_dice = 1.0 - numer / denom

    cost = weights.cls * cost_cls + weights.bce * cost_bce + weights.dice * cost_dice
    return cost.cpu().numpy()


def _solve_total(cost: np.ndarray) -> float:
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def hungarian_match(cost: np.ndarray) -> MatchResult:
    """Minimum-cost one-to-one assignment of GT columns to query rows."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2D matrix")
    num_q, num_g = cost.shape
    if num_g > num_q:
        raise ValueError(f"{num_g} GT objects exceed {num_q} queries")
    if num_g == 0:
        return MatchResult(pairs=(), total_cost=0.0)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")

    best_total = _solve_total(cost)
    if max(num_q, num_g) > EXACT_LEX_LIMIT:
        rows, cols = linear_sum_assignment(cost)
        order = np.argsort(cols)
        pairs = tuple((int(rows[i]), int(cols[i])) for i in order)
        return MatchResult(pairs=pairs, total_cost=best_total)

    # Lexicographic refinement: for each GT column in order, pin the smallest
    # query whose forced assignment still reaches the optimal total.
    taken: dict[int, int] = {}  # gt -> query
    free_rows = list(range(num_q))
    fixed_cost = 0.0
    for g in range(num_g):
        remaining_cols = list(range(g + 1, num_g))
        for q in free_rows:
            rest_rows = [r for r in free_rows if r != q]
            rest = (
                _solve_total(cost[np.ix_(rest_rows, remaining_cols)])
                if remaining_cols
                else 0.0
            )
            total = fixed_cost + cost[q, g] + rest
            if np.isclose(total, best_total, rtol=_RTOL, atol=_ATOL):
                taken[g] = q
                free_rows.remove(q)
                fixed_cost += cost[q, g]
                break
        else:
            raise AssertionError("lexicographic refinement failed to reproduce the optimum")
    pairs = tuple((taken[g], g) for g in range(num_g))
    return MatchResult(pairs=pairs, total_cost=best_total)


def match_predictions(class_logits: torch.Tensor, mask_logits: torch.Tensor,
                      gt_labels: np.ndarray, gt_masks: np.ndarray,
                      weights: "LossWeights") -> MatchResult:
    return hungarian_match(match_cost(class_logits, mask_logits, gt_labels, gt_masks, weights))
