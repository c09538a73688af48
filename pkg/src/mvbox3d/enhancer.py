"""3D position encoding of image features.

Turns a camera's frustum point grid into point position embeddings, predicts
a per-pixel depth distribution from image and depth features, collapses the
point embeddings into a single image position embedding per pixel, and fuses
everything back into the image feature map. All maps here are affine, taking
the defining equations literally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import FrustumPointGrid


@dataclass(frozen=True)
class LinearParams:
    """Affine map y = W x + b with a role tag used in error messages."""

    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    role: str = "linear"

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=float)
        bias = np.asarray(self.bias, dtype=float).reshape(-1)
        if weight.ndim != 2:
            raise ValueError(f"{self.role}: weight must be 2-D")
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"{self.role}: bias length must match weight rows")
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise ValueError(f"{self.role}: parameters must be finite")
        weight.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply along the last axis of x."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"{self.role}: expected last dim {self.in_dim}, got {x.shape[-1]}"
            )
        return x @ self.weight.T + self.bias


def init_linear(role: str, in_dim: int, out_dim: int, seed) -> LinearParams:
    """Seeded parameters: weights uniform in (-1/sqrt(in), +1/sqrt(in)), zero bias."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(in_dim)
    weight = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    return LinearParams(weight, np.zeros(out_dim), role)


@dataclass(frozen=True)
class FeatureMap:
    """Per-view feature grid: (H, W, C) with the stride mapping feature cells
    to image pixels (feature coordinate = pixel coordinate / stride)."""

    view: int
    stride: float
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 3 or grid.shape[0] < 1 or grid.shape[1] < 1:
            raise ValueError("feature grid must be (H, W, C) with H, W >= 1")
        if not np.all(np.isfinite(grid)):
            raise ValueError("feature grid must be finite")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def shape(self):
        return self.grid.shape


def point_position_embedding(grid: FrustumPointGrid, params: LinearParams) -> np.ndarray:
    """Embed every frustum sample point, giving an (h, w, K, C) array."""
    if params.in_dim != 3:
        raise ValueError(f"{params.role}: point embedding expects 3 inputs, got {params.in_dim}")
    return params.apply(grid.points)


def depth_distribution(img: FeatureMap, dep: FeatureMap, fuse: LinearParams,
                       head: LinearParams) -> np.ndarray:
    """Per-pixel depth distribution: softmax(head(fuse(concat(I, D)))) over K bins.

    Returns an (H, W, K) array whose (i, j) slices are nonnegative and sum to 1.
    """
    if img.grid.shape[:2] != dep.grid.shape[:2]:
        raise ValueError("image and depth feature maps must be spatially aligned")
    joint = np.concatenate([img.grid, dep.grid], axis=-1)
    if fuse.in_dim != joint.shape[-1]:
        raise ValueError(f"{fuse.role}: expected input dim {joint.shape[-1]}, got {fuse.in_dim}")
    logits = head.apply(fuse.apply(joint))
    logits = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=-1, keepdims=True)


def image_position_embedding(ppe: np.ndarray, dt: np.ndarray) -> np.ndarray:
    """Collapse (H, W, K, C) point embeddings with (H, W, K) depth weights."""
    ppe = np.asarray(ppe, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if ppe.shape[:3] != dt.shape:
        raise ValueError(f"shape mismatch: PPE {ppe.shape[:3]} vs DT {dt.shape}")
    return np.einsum("hwkc,hwk->hwc", ppe, dt)


def fuse_features(img: FeatureMap, dep: FeatureMap, ipe: np.ndarray,
                  params: LinearParams) -> FeatureMap:
    """Fused map: affine over concat(I, D, IPE) per pixel."""
    ipe = np.asarray(ipe, dtype=float)
    if img.grid.shape[:2] != dep.grid.shape[:2] or img.grid.shape[:2] != ipe.shape[:2]:
        raise ValueError("image, depth and position-embedding maps must be aligned")
    joint = np.concatenate([img.grid, dep.grid, ipe], axis=-1)
    return FeatureMap(img.view, img.stride, params.apply(joint))


def ipe_correlation_map(ipe: np.ndarray, ref: tuple[int, int]) -> np.ndarray:
    """Cosine similarity of every pixel's embedding with the one at ``ref``.

    Pixels with a zero-norm embedding get similarity 0; the reference pixel
    itself must have a nonzero embedding.
    """
    ipe = np.asarray(ipe, dtype=float)
    i, j = ref
    ref_vec = ipe[i, j]
    ref_norm = np.linalg.norm(ref_vec)
    if ref_norm == 0.0:
        raise ValueError("reference pixel has a zero-norm embedding")
    norms = np.linalg.norm(ipe, axis=-1)
    dots = ipe @ ref_vec
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(norms > 0, dots / (norms * ref_norm), 0.0)
    return np.clip(sims, -1.0, 1.0)


def expected_frustum_points(grid: FrustumPointGrid, dt: np.ndarray) -> np.ndarray:
    """Depth-distribution-weighted mean 3D point per pixel, (h, w, 3)."""
    dt = np.asarray(dt, dtype=float)
    if grid.points.shape[:3] != dt.shape:
        raise ValueError("depth distribution does not match the frustum grid")
    return np.einsum("hwkc,hwk->hwc", grid.points, dt)
