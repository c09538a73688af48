"""Box regression and classification losses with analytic gradients.

Box losses are functions of the 9 predicted box parameters
[x, y, z, w, l, h, roll, pitch, yaw]; each returns its value together with
the gradient w.r.t. those parameters. Selection-type non-smoothness (L1
kinks, nearest-neighbor and permutation argmins, norms at zero) uses the
frozen-active-set subgradient, with zero at exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CORNER_OFFSETS,
    Box9DoF,
    box_corners,
    corner_permutation_table,
    rotation_derivatives,
)

WASSERSTEIN_EPS = 1e-8
FOCAL_GAMMA = 2.0
FOCAL_ALPHA = 0.25

BOX_LOSS_KINDS = ("l1", "ccd", "pcd", "wd")

_PERM_TABLE = corner_permutation_table()
_NORM_FLOOR = 1e-12
_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossValueGrad:
    """A nonnegative loss value and its gradient w.r.t. the differentiated
    parameters (9 box parameters for box losses, logit-shaped for focal)."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class LossWeights:
    """Combination weights (classification, center, box)."""

    cls_weight: float = 1.0
    center_weight: float = 0.8
    box_weight: float = 1.0

    def __post_init__(self):
        if min(self.cls_weight, self.center_weight, self.box_weight) < 0:
            raise ValueError("loss weights must be nonnegative")


def corner_jacobian(box: Box9DoF) -> np.ndarray:
    """d corner / d params, shape (8, 3, 9)."""
    rot, drot = rotation_derivatives(box.euler)
    jac = np.zeros((8, 3, 9))
    jac[:, :, :3] = np.eye(3)
    scaled = CORNER_OFFSETS * box.size  # (8, 3) local points
    for k in range(3):
        jac[:, :, 3 + k] = np.outer(CORNER_OFFSETS[:, k], rot[:, k])
        jac[:, :, 6 + k] = scaled @ drot[k].T
    return jac


def l1_box_loss(pred: Box9DoF, gt: Box9DoF) -> LossValueGrad:
    """Mean absolute difference over the 9 raw parameters.

    Deliberately orientation-ambiguous: a reparameterized but geometrically
    identical ground truth generally gives a nonzero value.
    """
    diff = pred.to_params() - gt.to_params()
    value = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / 9.0
    return LossValueGrad(value, grad)


def corner_chamfer_loss(pred: Box9DoF, gt: Box9DoF) -> LossValueGrad:
    """Symmetric chamfer distance between the two 8-corner sets.

    Value is the mean nearest-neighbor distance from pred corners to gt
    corners plus the mean in the other direction; the gradient freezes both
    nearest-neighbor assignments.
    """
    pc = box_corners(pred)
    gc = box_corners(gt)
    jac = corner_jacobian(pred)
    diff = pc[:, None, :] - gc[None, :, :]  # (8, 8, 3)
    dist = np.linalg.norm(diff, axis=2)
    grad = np.zeros(9)
    # pred -> gt term
    nn = np.argmin(dist, axis=1)
    d_pg = dist[np.arange(8), nn]
    value = float(np.mean(d_pg))
    for i in range(8):
        if d_pg[i] > _NORM_FLOOR:
            unit = diff[i, nn[i]] / d_pg[i]
            grad += unit @ jac[i] / 8.0
    # gt -> pred term
    nn_rev = np.argmin(dist, axis=0)
    d_gp = dist[nn_rev, np.arange(8)]
    value += float(np.mean(d_gp))
    for j in range(8):
        i = nn_rev[j]
        if d_gp[j] > _NORM_FLOOR:
            unit = diff[i, j] / d_gp[j]
            grad += unit @ jac[i] / 8.0
    return LossValueGrad(value, grad)


def permutation_corner_loss(pred: Box9DoF, gt: Box9DoF) -> LossValueGrad:
    """Minimum over the 48 gt corner orderings of the mean per-corner distance.

    The orderings are the canonical corner sequences of the 48 cuboid
    symmetries, so any reparameterization of the ground truth scores zero.
    The gradient freezes the argmin ordering.
    """
    pc = box_corners(pred)
    gc = box_corners(gt)
    orderings = gc[_PERM_TABLE]  # (48, 8, 3)
    diff = pc[None, :, :] - orderings  # (48, 8, 3)
    dist = np.linalg.norm(diff, axis=2)  # (48, 8)
    means = dist.mean(axis=1)
    best = int(np.argmin(means))
    value = float(means[best])
    jac = corner_jacobian(pred)
    grad = np.zeros(9)
    for i in range(8):
        d = dist[best, i]
        if d > _NORM_FLOOR:
            grad += (diff[best, i] / d) @ jac[i] / 8.0
    return LossValueGrad(value, grad)


def _sigma_and_grads(box: Box9DoF):
    """Sigma = R diag(size) R^T plus d Sigma / d size_k and d Sigma / d euler_k."""
    rot, drot = rotation_derivatives(box.euler)
    s_diag = rot * box.size  # R @ diag(size)
    sigma = s_diag @ rot.T
    d_size = np.stack([np.outer(rot[:, k], rot[:, k]) for k in range(3)])
    d_euler = np.empty((3, 3, 3))
    for k in range(3):
        part = drot[k] @ s_diag.T
        d_euler[k] = part + part.T
    return sigma, d_size, d_euler


def wasserstein_loss(pred: Box9DoF, gt: Box9DoF) -> LossValueGrad:
    """Simplified Wasserstein box distance.

    Computes sqrt(||mu_gt - mu_pred||_2 + ||Sigma_gt - Sigma_pred||_F + eps)
    with Sigma = R diag(w, l, h) R^T, shifted by the constant sqrt(eps) so an
    exact (or 48-symmetry-equivalent) match scores 0. The shift leaves the
    gradient untouched.
    """
    sigma_p, d_size, d_euler = _sigma_and_grads(pred)
    sigma_g = _sigma_and_grads(gt)[0]
    mu_diff = pred.center - gt.center
    center_dist = float(np.linalg.norm(mu_diff))
    sig_diff = sigma_p - sigma_g
    sig_dist = float(np.linalg.norm(sig_diff))
    inner = center_dist + sig_dist
    value = float(np.sqrt(inner + WASSERSTEIN_EPS) - np.sqrt(WASSERSTEIN_EPS))

    d_inner = np.zeros(9)
    if center_dist > _NORM_FLOOR:
        d_inner[:3] = mu_diff / center_dist
    if sig_dist > _NORM_FLOOR:
        direction = sig_diff / sig_dist
        for k in range(3):
            d_inner[3 + k] = np.sum(direction * d_size[k])
            d_inner[6 + k] = np.sum(direction * d_euler[k])
    grad = d_inner / (2.0 * np.sqrt(inner + WASSERSTEIN_EPS))
    return LossValueGrad(value, grad)


def center_loss(pred_center, gt_center) -> LossValueGrad:
    """Squared Euclidean distance between centers; gradient 2 (pred - gt)."""
    p = np.asarray(pred_center, dtype=float).reshape(3)
    g = np.asarray(gt_center, dtype=float).reshape(3)
    diff = p - g
    return LossValueGrad(float(diff @ diff), 2.0 * diff)


def focal_loss(logits, target) -> LossValueGrad:
    """Binary sigmoid focal loss summed over classes (gamma 2, alpha 0.25).

    ``target`` is the positive class index, or None for pure background.
    """
    x = np.asarray(logits, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("logits must be finite")
    if target is not None and not (0 <= target < x.size):
        raise ValueError(f"target index {target} out of range for {x.size} classes")
    p = 1.0 / (1.0 + np.exp(-x))
    p = np.clip(p, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    pos = np.zeros(x.size, dtype=bool)
    if target is not None:
        pos[target] = True
    value = 0.0
    grad = np.empty(x.size)
    a, g = FOCAL_ALPHA, FOCAL_GAMMA
    pp = p[pos]
    value += float(np.sum(-a * (1 - pp) ** g * np.log(pp)))
    grad[pos] = a * (1 - pp) ** g * (g * pp * np.log(pp) - (1 - pp))
    pn = p[~pos]
    value += float(np.sum(-(1 - a) * pn**g * np.log(1 - pn)))
    grad[~pos] = (1 - a) * pn**g * (pn - g * (1 - pn) * np.log(1 - pn))
    return LossValueGrad(value, grad)


_BOX_LOSSES = {
    "l1": l1_box_loss,
    "ccd": corner_chamfer_loss,
    "pcd": permutation_corner_loss,
    "wd": wasserstein_loss,
}


def get_box_loss(kind: str):
    try:
        return _BOX_LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown box loss kind {kind!r}, expected one of {BOX_LOSS_KINDS}")


@dataclass(frozen=True)
class TotalLoss:
    """Weighted sum of classification, center and box losses.

    ``box_grad`` is w.r.t. the 9 predicted box parameters (center gradient
    folded into the first three entries); ``logits_grad`` is w.r.t. the
    classification logits.
    """

    value: float
    box_grad: np.ndarray
    logits_grad: np.ndarray


def total_loss(pred_box: Box9DoF, pred_logits, gt_box: Box9DoF, gt_class,
               weights: LossWeights, box_loss_kind: str) -> TotalLoss:
    """Combined training loss for one matched prediction/ground-truth pair."""
    box_fn = get_box_loss(box_loss_kind)
    cls = focal_loss(pred_logits, gt_class)
    cen = center_loss(pred_box.center, gt_box.center)
    box = box_fn(pred_box, gt_box)
    value = (
        weights.cls_weight * cls.value
        + weights.center_weight * cen.value
        + weights.box_weight * box.value
    )
    box_grad = weights.box_weight * box.grad.copy()
    box_grad[:3] += weights.center_weight * cen.grad
    return TotalLoss(float(value), box_grad, weights.cls_weight * cls.grad)
