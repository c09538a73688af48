"""Pinhole camera model: projection, unprojection, frustum tests, frustum
point grids for position encoding, and camera intrinsic standardization.

A camera is intrinsics (fu, fv, cu, cv), a rigid camera-to-world extrinsic
matrix, and an image size. Pixel coordinates are continuous with integer
values addressing pixel centers; camera-frame depth is distance along the
optical (+z) axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Reference standardized intrinsics (fu, fv, cu, cv) used when no explicit
# target is given; the principal point assumes a 512x512 canvas.
DEFAULT_STD_INTRINSICS = (432.579, 539.857, 256.0, 256.0)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics (fu, fv, cu, cv), 4x4 camera-to-world
    extrinsics, image size (width, height) in pixels."""

    intrinsics: np.ndarray
    extrinsics: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        intr = np.asarray(self.intrinsics, dtype=float).reshape(-1)
        if intr.shape != (4,):
            raise ValueError("intrinsics must be (fu, fv, cu, cv)")
        if intr[0] <= 0 or intr[1] <= 0:
            raise ValueError("focal lengths must be strictly positive")
        ext = np.asarray(self.extrinsics, dtype=float)
        if ext.shape != (4, 4):
            raise ValueError("extrinsics must be a 4x4 matrix")
        if np.max(np.abs(ext[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise ValueError("extrinsics bottom row must be [0, 0, 0, 1]")
        rot = ext[:3, :3]
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-6 or np.linalg.det(rot) < 0:
            raise ValueError("extrinsics rotation block must be orthogonal with det +1")
        width, height = self.image_size
        if width < 1 or height < 1:
            raise ValueError("image size must be at least 1x1")
        intr.setflags(write=False)
        ext.setflags(write=False)
        object.__setattr__(self, "intrinsics", intr)
        object.__setattr__(self, "extrinsics", ext)
        object.__setattr__(self, "image_size", (int(width), int(height)))

    def world_to_camera(self) -> np.ndarray:
        rot = self.extrinsics[:3, :3]
        t = self.extrinsics[:3, 3]
        inv = np.eye(4)
        inv[:3, :3] = rot.T
        inv[:3, 3] = -rot.T @ t
        return inv


@dataclass(frozen=True)
class PixelDepth:
    """Continuous pixel coordinates (u, v) plus camera-frame depth in meters."""

    u: float
    v: float
    depth: float


@dataclass(frozen=True)
class FrustumPointGrid:
    """World-frame sample points of a camera frustum.

    points[i, j, k] unprojects pixel (pixel_u[j], pixel_v[i]) at depths[k];
    depths are k * max_depth / num_depths with the k = 0 sample shifted to
    the first mid-bin to avoid the singular zero-depth plane.
    """

    dims: tuple[int, int, int]  # (h, w, K)
    points: np.ndarray  # (h, w, K, 3)
    pixel_u: np.ndarray  # (w,)
    pixel_v: np.ndarray  # (h,)
    depths: np.ndarray  # (K,)
    max_depth: float


class SingularProjectionError(ValueError):
    """Raised when projecting a point that lies exactly on the camera plane."""


def unproject(cam: CameraModel, pd: PixelDepth) -> np.ndarray:
    """World point for pixel (u, v) at camera-frame depth d > 0."""
    if not pd.depth > 0:
        raise ValueError(f"depth must be positive, got {pd.depth}")
    fu, fv, cu, cv = cam.intrinsics
    x = (pd.u - cu) / fu * pd.depth
    y = (pd.v - cv) / fv * pd.depth
    cam_pt = np.array([x, y, pd.depth])
    return cam.extrinsics[:3, :3] @ cam_pt + cam.extrinsics[:3, 3]


def project(cam: CameraModel, world) -> PixelDepth:
    """Pixel coordinates and depth of a world point; inverse of unproject."""
    p = np.asarray(world, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError("world point must be finite")
    rot = cam.extrinsics[:3, :3]
    t = cam.extrinsics[:3, 3]
    cam_pt = rot.T @ (p - t)
    d = cam_pt[2]
    if d == 0.0:
        raise SingularProjectionError("point lies on the camera plane (depth 0)")
    fu, fv, cu, cv = cam.intrinsics
    return PixelDepth(float(fu * cam_pt[0] / d + cu), float(fv * cam_pt[1] / d + cv), float(d))


def project_points(cam: CameraModel, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection: (u, v, depth) arrays for an (N, 3) point array.

    Entries with depth <= 0 get NaN pixel coordinates; callers are expected
    to mask on depth before using them.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    rot = cam.extrinsics[:3, :3]
    t = cam.extrinsics[:3, 3]
    cam_pts = (pts - t) @ rot
    d = cam_pts[:, 2]
    fu, fv, cu, cv = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(d > 0, fu * cam_pts[:, 0] / d + cu, np.nan)
        v = np.where(d > 0, fv * cam_pts[:, 1] / d + cv, np.nan)
    return u, v, d


def in_frustum(cam: CameraModel, world, max_depth: float) -> bool:
    """True iff the point projects inside the image with 0 < depth <= max_depth."""
    if not max_depth > 0:
        raise ValueError("max_depth must be positive")
    try:
        pd = project(cam, world)
    except SingularProjectionError:
        return False
    width, height = cam.image_size
    return (
        pd.depth > 0
        and pd.depth <= max_depth
        and 0.0 <= pd.u <= width - 1
        and 0.0 <= pd.v <= height - 1
    )


def _grid_pixel_centers(extent: int, cells: int) -> np.ndarray:
    # Cell j of a `cells`-wide grid over `extent` pixels, addressed at its
    # center in continuous pixel coordinates (pixel area spans [-0.5, extent-0.5]).
    return -0.5 + (np.arange(cells) + 0.5) * (extent / cells)


def frustum_point_grid(cam: CameraModel, grid_hw: tuple[int, int], max_depth: float,
                       num_depths: int) -> FrustumPointGrid:
    """Uniform world-frame samples of the view frustum.

    Pixels are the h x w cell centers of the image; depths are the uniform
    ladder k * max_depth / num_depths, k = 0 .. num_depths-1, except that the
    unprojectable k = 0 plane is replaced by the mid-bin max_depth / (2 K).
    """
    if num_depths < 1:
        raise ValueError("num_depths must be >= 1")
    if not max_depth > 0:
        raise ValueError("max_depth must be positive")
    h, w = grid_hw
    width, height = cam.image_size
    us = _grid_pixel_centers(width, w)
    vs = _grid_pixel_centers(height, h)
    depths = np.arange(num_depths) * (max_depth / num_depths)
    depths[0] = max_depth / (2 * num_depths)
    fu, fv, cu, cv = cam.intrinsics
    xn = (us - cu) / fu  # (w,)
    yn = (vs - cv) / fv  # (h,)
    cam_pts = np.empty((h, w, num_depths, 3))
    cam_pts[..., 0] = xn[None, :, None] * depths[None, None, :]
    cam_pts[..., 1] = yn[:, None, None] * depths[None, None, :]
    cam_pts[..., 2] = depths[None, None, :]
    rot = cam.extrinsics[:3, :3]
    t = cam.extrinsics[:3, 3]
    points = cam_pts @ rot.T + t
    return FrustumPointGrid((h, w, num_depths), points, us, vs, depths, float(max_depth))


# ---------------------------------------------------------------------------
# Camera intrinsic standardization (image warp to a fixed virtual camera).
# ---------------------------------------------------------------------------


def bilinear_warp(image: np.ndarray, src_u: np.ndarray, src_v: np.ndarray) -> np.ndarray:
    """Sample ``image`` at continuous (src_u, src_v) with zero fill outside.

    A sample is valid when 0 <= u <= W-1 and 0 <= v <= H-1; the four-neighbor
    footprint is clamped at the border, everything else is zero-padded.
    """
    img = np.asarray(image, dtype=float)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    height, width = img.shape[:2]
    valid = (src_u >= 0) & (src_u <= width - 1) & (src_v >= 0) & (src_v <= height - 1)
    u = np.clip(src_u, 0, width - 1)
    v = np.clip(src_v, 0, height - 1)
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    u1 = np.minimum(u0 + 1, width - 1)
    v1 = np.minimum(v0 + 1, height - 1)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    out = (
        img[v0, u0] * (1 - fu) * (1 - fv)
        + img[v0, u1] * fu * (1 - fv)
        + img[v1, u0] * (1 - fu) * fv
        + img[v1, u1] * fu * fv
    )
    out[~valid] = 0.0
    return out[..., 0] if squeeze else out


def standardize_intrinsics(image, cam: CameraModel, std_intrinsics=None):
    """Warp an image so it looks as if taken with the standardized intrinsics.

    Output pixel (i, j) is bilinearly sampled from the source image at the
    location the original camera would have imaged the same ray, which for a
    pinhole pair is the affine map
        u_src = fu_src * (j - cu_std) / fu_std + cu_src   (and likewise for v).
    Coordinates falling outside the source are zero-padded. The returned
    camera carries the standardized intrinsics and untouched extrinsics.

    Returns:
        (warped image as float array, standardized CameraModel)
    """
    if std_intrinsics is None:
        std_intrinsics = DEFAULT_STD_INTRINSICS
    std = np.asarray(std_intrinsics, dtype=float).reshape(4)
    if std[0] <= 0 or std[1] <= 0:
        raise ValueError("standardized focal lengths must be positive")
    img = np.asarray(image, dtype=float)
    height, width = img.shape[:2]
    fu_s, fv_s, cu_s, cv_s = cam.intrinsics
    fu_t, fv_t, cu_t, cv_t = std
    jj, ii = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    src_u = fu_s * (jj - cu_t) / fu_t + cu_s
    src_v = fv_s * (ii - cv_t) / fv_t + cv_s
    warped = bilinear_warp(img, src_u, src_v)
    new_cam = CameraModel(std, cam.extrinsics.copy(), cam.image_size)
    return warped, new_cam


# ---------------------------------------------------------------------------
# Camera JSON schema: {intrinsics: [fu, fv, cu, cv],
#                      extrinsics: 16 row-major floats, width, height}
# ---------------------------------------------------------------------------


def camera_to_dict(cam: CameraModel) -> dict:
    return {
        "intrinsics": [float(x) for x in cam.intrinsics],
        "extrinsics": [float(x) for x in cam.extrinsics.ravel()],
        "width": cam.image_size[0],
        "height": cam.image_size[1],
    }


def camera_from_dict(data: dict) -> CameraModel:
    try:
        intr = data["intrinsics"]
        ext = np.asarray(data["extrinsics"], dtype=float).reshape(4, 4)
        size = (int(data["width"]), int(data["height"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed camera record: {exc}") from exc
    return CameraModel(intr, ext, size)


def save_camera_json(path, cam: CameraModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(camera_to_dict(cam), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_camera_json(path) -> CameraModel:
    with open(path, "r", encoding="utf-8") as fh:
        return camera_from_dict(json.load(fh))
