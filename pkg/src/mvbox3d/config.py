"""Run configuration with JSON round-trip.

Model-side defaults (depth range, number of depth bins, key-point counts,
loss weights, NMS/AP thresholds, anchors per view, standardized intrinsics)
follow the reference configuration; scene and fitting parameters are
harness plumbing with desk-scale defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass


@dataclass
class RunConfig:
    # feature / position-encoding dimensions (desk scale; reference uses 256)
    embed_dim: int = 32
    max_depth: float = 10.0
    num_depth_points: int = 64
    num_fixed_keypoints: int = 7
    num_learnable_keypoints: int = 9
    # loss combination weights
    lambda_cls: float = 1.0
    lambda_center: float = 0.8
    lambda_box: float = 1.0
    # thresholds
    nms_iou_threshold: float = 0.4
    ap_iou_threshold: float = 0.25
    size_small_max: float = 0.01
    size_medium_max: float = 0.5
    anchors_per_view: int = 50
    # box-fitting loop
    learning_rate: float = 0.012
    fit_steps: int = 1200
    fit_center_jitter: float = 0.3
    fit_size_jitter: float = 0.3
    fit_angle_jitter: float = 0.5
    # synthetic scenes
    seed: int = 0
    room_width: float = 6.0
    room_depth: float = 6.0
    room_height: float = 3.0
    min_boxes: int = 1
    max_boxes: int = 10
    min_box_separation: float = 1.0
    box_size_min: float = 0.3
    box_size_max: float = 0.9
    min_cameras: int = 2
    max_cameras: int = 8
    image_width: int = 512
    image_height: int = 512
    feature_stride: int = 8
    num_categories: int = 4

    def __post_init__(self):
        positive = (
            "embed_dim", "max_depth", "num_depth_points", "learning_rate",
            "fit_steps", "image_width", "image_height", "feature_stride",
            "room_width", "room_depth", "room_height", "num_categories",
            "anchors_per_view",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")
        if self.min_boxes < 1 or self.max_boxes < self.min_boxes:
            raise ValueError("box count range is inconsistent")
        if self.min_cameras < 1 or self.max_cameras < self.min_cameras:
            raise ValueError("camera count range is inconsistent")
        if not 0 < self.size_small_max <= self.size_medium_max:
            raise ValueError("size class thresholds must be increasing and positive")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
