"""One-to-one assignment between predictions and ground truth.

Builds a cost matrix from the same weighted loss terms used for training,
solves it with the Hungarian algorithm (lexicographically smallest optimal
assignment), and evaluates the matched training loss with background
classification for unmatched predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .losses import (
    FOCAL_ALPHA,
    FOCAL_GAMMA,
    LossWeights,
    center_loss,
    focal_loss,
    get_box_loss,
    total_loss,
)

_PROB_FLOOR = 1e-12
_TIE_TOL = 1e-9


def focal_cost(prob: float) -> float:
    """Focal-style classification cost of assigning a gt class with probability p."""
    p = min(max(prob, _PROB_FLOOR), 1.0 - _PROB_FLOOR)
    pos = FOCAL_ALPHA * (1.0 - p) ** FOCAL_GAMMA * (-np.log(p))
    neg = (1.0 - FOCAL_ALPHA) * p**FOCAL_GAMMA * (-np.log(1.0 - p))
    return float(pos - neg)


def cost_matrix(preds, gts, weights: LossWeights, box_loss_kind: str) -> np.ndarray:
    """Pairwise matching costs.

    Args:
        preds: list of (Box9DoF, class probability vector).
        gts: list of (Box9DoF, class id).
        weights: the lambda weights, reused as matching-cost weights.
        box_loss_kind: which box regression loss to use for the box term.
    """
    if not preds or not gts:
        raise ValueError("cost_matrix needs at least one prediction and one ground truth")
    box_fn = get_box_loss(box_loss_kind)
    cost = np.empty((len(preds), len(gts)))
    for p, (pbox, probs) in enumerate(preds):
        probs = np.asarray(probs, dtype=float)
        for g, (gbox, gcls) in enumerate(gts):
            cost[p, g] = (
                weights.cls_weight * focal_cost(float(probs[gcls]))
                + weights.center_weight * center_loss(pbox.center, gbox.center).value
                + weights.box_weight * box_fn(pbox, gbox).value
            )
    return cost


def _optimal_cost(cost: np.ndarray) -> float:
    if cost.shape[0] == 0 or cost.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment of min(P, G) pairs.

    Among all optimal assignments, returns the lexicographically smallest
    pair list (pairs sorted by prediction index). Resolved by fixing rows in
    order and re-solving the remainder, so ties are broken deterministically.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] == 0 or c.shape[1] == 0:
        raise ValueError("cost matrix must be 2-D and nonempty")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")
    n_rows, n_cols = c.shape
    best = _optimal_cost(c)
    tol = _TIE_TOL * max(1.0, abs(best))
    pairs: list[tuple[int, int]] = []
    used_cols: list[int] = []
    fixed_cost = 0.0
    for row in range(n_rows):
        if len(pairs) == min(n_rows, n_cols):
            break
        free_cols = [g for g in range(n_cols) if g not in used_cols]
        remaining_rows = np.arange(row + 1, n_rows)
        assigned = None
        for g in free_cols:
            rest_cols = [x for x in free_cols if x != g]
            rest = c[np.ix_(remaining_rows, rest_cols)] if rest_cols else np.zeros((0, 0))
            total = fixed_cost + c[row, g] + _optimal_cost(rest)
            if total <= best + tol:
                assigned = g
                break
        if assigned is not None:
            pairs.append((row, assigned))
            used_cols.append(assigned)
            fixed_cost += c[row, assigned]
    return pairs


@dataclass(frozen=True)
class PredictionLoss:
    """Per-prediction loss terms: matched predictions carry box and logits
    gradients, unmatched ones only the background classification gradient."""

    value: float
    box_grad: np.ndarray
    logits_grad: np.ndarray
    matched_gt: int | None


@dataclass(frozen=True)
class MatchedLoss:
    assignment: list[tuple[int, int]]
    per_prediction: list[PredictionLoss]
    total_value: float


def matched_loss(preds, gts, weights: LossWeights, box_loss_kind: str) -> MatchedLoss:
    """Hungarian matching followed by the weighted training loss.

    Args:
        preds: list of (Box9DoF, logits vector).
        gts: list of (Box9DoF, class id); may be empty, in which case every
            prediction receives the background classification loss only.
    """
    logits = [np.asarray(l, dtype=float).reshape(-1) for _, l in preds]
    if gts:
        probs = [1.0 / (1.0 + np.exp(-l)) for l in logits]
        cost = cost_matrix(
            [(box, pr) for (box, _), pr in zip(preds, probs)], gts, weights, box_loss_kind
        )
        assignment = hungarian(cost)
    else:
        assignment = []
    matched = {p: g for p, g in assignment}
    per_pred = []
    total_value = 0.0
    for p, (pbox, _) in enumerate(preds):
        if p in matched:
            g = matched[p]
            gbox, gcls = gts[g]
            tl = total_loss(pbox, logits[p], gbox, gcls, weights, box_loss_kind)
            per_pred.append(PredictionLoss(tl.value, tl.box_grad, tl.logits_grad, g))
        else:
            cls = focal_loss(logits[p], None)
            per_pred.append(
                PredictionLoss(
                    weights.cls_weight * cls.value,
                    np.zeros(9),
                    weights.cls_weight * cls.grad,
                    None,
                )
            )
        total_value += per_pred[-1].value
    return MatchedLoss(assignment, per_pred, float(total_value))
