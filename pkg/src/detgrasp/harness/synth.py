"""Seeded synthetic scenes with a planted best grasp.

Generation uses numpy's PCG64 generator seeded from ``(seed, index)`` through
``SeedSequence``; qualities are multiples of ``1 / quality_levels`` so exact
ties between ordinary candidates are common.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..dgbcm import DetectionBox, DomainError, point_in_box
from ..geometry import GraspPose, RotatedRect, pose_to_rect, wrap_half_turn
from .formats import SceneRecord

PRNG = "PCG64"
LABELS = ("apple", "banana", "cup", "handset", "mouse", "scissors")


class GenerationError(DomainError):
    kind = "GenerationError"


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    n_boxes: int = 4
    n_labels: int = 3
    n_candidates: int = 12
    box_min: int = 30
    box_max: int = 100
    quality_levels: int = 20
    inside_fraction: float = 0.6
    height_ratio: float = 0.5

    def validate(self):
        if self.n_boxes < 1 or self.n_candidates < 1:
            raise GenerationError("a scene needs at least one box and one candidate")
        if not 1 <= self.n_labels <= len(LABELS):
            raise GenerationError(f"n_labels must be in 1..{len(LABELS)}")
        if not 1 <= self.box_min <= self.box_max:
            raise GenerationError("need 1 <= box_min <= box_max")
        if self.box_max > min(self.width, self.height):
            raise GenerationError(f"boxes up to {self.box_max}px do not fit a {self.width}x{self.height} image")
        if self.quality_levels < 2:
            raise GenerationError("quality_levels must be >= 2")


def _random_pose(rng, box, spec, level):
    x = float(rng.integers(int(math.ceil(box.x1)), int(math.floor(box.x2)) + 1))
    y = float(rng.integers(int(math.ceil(box.y1)), int(math.floor(box.y2)) + 1))
    theta = float(rng.integers(-6, 7)) * (math.pi / 12)
    width = float(rng.integers(10, 41))
    return GraspPose(x, y, theta, width, level / spec.quality_levels)


def gen_synthetic_scene(seed, spec: SceneSpec = SceneSpec(), index=0) -> SceneRecord:
    spec.validate()
    rng = np.random.default_rng([int(seed), int(index)])
    labels = [str(v) for v in rng.choice(LABELS, size=spec.n_labels, replace=False)]
    image = DetectionBox("image", 1.0, 0.0, 0.0, float(spec.width), float(spec.height))

    boxes = []
    for n in range(spec.n_boxes):
        label = labels[0] if n == 0 else labels[int(rng.integers(0, len(labels)))]
        bw, bh = (int(v) for v in rng.integers(spec.box_min, spec.box_max + 1, size=2))
        x1 = int(rng.integers(0, spec.width - bw + 1))
        y1 = int(rng.integers(0, spec.height - bh + 1))
        score = int(rng.integers(50, 101)) / 100
        boxes.append(DetectionBox(label, score, float(x1), float(y1), float(x1 + bw), float(y1 + bh)))

    target = labels[0]
    target_boxes = [b for b in boxes if b.label == target]
    candidates = []
    for _ in range(spec.n_candidates - 1):
        region = boxes[int(rng.integers(0, len(boxes)))] if rng.random() < spec.inside_fraction else image
        candidates.append(_random_pose(rng, region, spec, int(rng.integers(0, spec.quality_levels))))

    in_target = [g.quality for g in candidates if any(point_in_box(g.x, g.y, b) for b in target_boxes)]
    best_level = round(max(in_target, default=-1.0 / spec.quality_levels) * spec.quality_levels) + 1
    planted = _random_pose(rng, target_boxes[int(rng.integers(0, len(target_boxes)))], spec, best_level)
    candidates.insert(int(rng.integers(0, len(candidates) + 1)), planted)

    ground_truth = {target: (_jittered_rect(rng, planted, spec.height_ratio),)}
    return SceneRecord(
        scene_id=f"{int(seed)}-{int(index)}",
        image_size=(spec.width, spec.height),
        detections=tuple(boxes),
        ground_truth=ground_truth,
        grasp_candidates=tuple(candidates),
        target=target,
        planted_best=(target, planted),
        seed=(int(seed), int(index)),
    )


def _jittered_rect(rng, pose, height_ratio):
    """A ground-truth rectangle close enough to ``pose`` to count as a hit."""
    dx, dy = (float(v) for v in rng.integers(-1, 2, size=2))
    dtheta = float(rng.integers(-1, 2)) * (math.pi / 36)
    gt = GraspPose(pose.x + dx, pose.y + dy, wrap_half_turn(pose.theta + dtheta), pose.width, pose.quality)
    rect = pose_to_rect(gt, height_ratio)
    return RotatedRect(rect.vertices, gt.theta)


def gen_scenes(seed, count, spec: SceneSpec = SceneSpec(), workers=1):
    if count < 0:
        raise GenerationError("count must be >= 0")
    if workers <= 1:
        return [gen_synthetic_scene(seed, spec, i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: gen_synthetic_scene(seed, spec, i), range(count)))
