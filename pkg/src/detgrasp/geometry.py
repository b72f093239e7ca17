"""Planar grasp poses, grasp rectangles, the rectangle IoU metric and
decoding of quality/angle/width maps.

Pixel convention: ``x`` is the column, ``y`` the row, origin top-left. A pose
angle ``theta`` points the jaw axis along ``(cos theta, sin theta)`` in
``(x, y)`` pixel coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import _backend

HALF_PI = math.pi / 2


def wrap_half_turn(a):
    """Map an angle into ``[-pi/2, pi/2)`` modulo pi."""
    return (a + HALF_PI) % math.pi - HALF_PI


@dataclass(frozen=True)
class GraspPose:
    x: float
    y: float
    theta: float
    width: float
    quality: float

    def __post_init__(self):
        for name in ("x", "y", "theta", "width", "quality"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"grasp {name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not -HALF_PI <= self.theta <= HALF_PI:
            raise ValueError(f"grasp angle {self.theta} outside [-pi/2, pi/2]")
        if self.width < 0:
            raise ValueError(f"grasp width must be >= 0, got {self.width}")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"grasp quality {self.quality} outside [0, 1]")

    def sort_key(self):
        """Quality descending, then lower (y, x); remaining fields make the order total."""
        return (-self.quality, self.y, self.x, self.theta, self.width)

    def to_dict(self):
        return {"x": self.x, "y": self.y, "theta": self.theta, "width": self.width, "quality": self.quality}

    @classmethod
    def from_dict(cls, d):
        return cls(d["x"], d["y"], d["theta"], d["width"], d["quality"])


@dataclass(frozen=True, eq=False)
class RotatedRect:
    """Four vertices, counter-clockwise in ``(x, y)``; ``angle`` is the grasp
    direction (first edge) normalized into ``[-pi/2, pi/2]``."""

    vertices: np.ndarray
    angle: float

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(4, 2)
        if not np.isfinite(v).all():
            raise ValueError("rectangle vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def from_vertices(cls, vertices, angle=None):
        v = np.array(vertices, dtype=np.float64).reshape(4, 2)
        if angle is None:
            dx, dy = v[1] - v[0]
            angle = wrap_half_turn(math.atan2(dy, dx))
            if angle == -HALF_PI:
                angle = HALF_PI if dy > 0 else -HALF_PI
        return cls(v, angle)

    def area(self):
        return abs(polygon_signed_area(self.vertices))

    def __eq__(self, other):
        if not isinstance(other, RotatedRect):
            return NotImplemented
        return self.angle == other.angle and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((self.angle, self.vertices.tobytes()))

    def to_dict(self):
        return {"vertices": self.vertices.tolist(), "angle": self.angle}

    @classmethod
    def from_dict(cls, d):
        return cls.from_vertices(d["vertices"], d.get("angle"))


@dataclass(frozen=True)
class GraspMaps:
    quality: np.ndarray
    angle: np.ndarray
    width: np.ndarray
    w_max: float
    width_scale: float = 1.0

    def __post_init__(self):
        maps = [np.array(getattr(self, k), dtype=np.float64) for k in ("quality", "angle", "width")]
        if maps[0].ndim != 2 or any(m.shape != maps[0].shape for m in maps):
            raise ValueError("quality, angle and width maps must share one 2-D shape")
        q, a, _ = maps
        if q.min() < 0 or q.max() > 1:
            raise ValueError("quality map must lie in [0, 1]")
        if a.min() < -HALF_PI or a.max() > HALF_PI:
            raise ValueError("angle map must lie in [-pi/2, pi/2]")
        if not self.w_max >= 0:
            raise ValueError("w_max must be >= 0")
        for k, m in zip(("quality", "angle", "width"), maps):
            object.__setattr__(self, k, m)

    def __eq__(self, other):
        if not isinstance(other, GraspMaps):
            return NotImplemented
        return (
            self.w_max == other.w_max
            and self.width_scale == other.width_scale
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("quality", "angle", "width"))
        )

    def to_dict(self):
        return {
            "quality": self.quality.tolist(),
            "angle": self.angle.tolist(),
            "width": self.width.tolist(),
            "w_max": self.w_max,
            "width_scale": self.width_scale,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["quality"], d["angle"], d["width"], d["w_max"], d.get("width_scale", 1.0))


def polygon_signed_area(pts):
    pts = np.asarray(pts, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def pose_to_rect(pose: GraspPose, height_ratio=0.5) -> RotatedRect:
    if not height_ratio > 0:
        raise ValueError("height_ratio must be positive")
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    a = pose.width / 2.0
    b = pose.width * height_ratio / 2.0
    ax, ay = a * c, a * s
    bx, by = -b * s, b * c
    verts = [
        (pose.x - ax - bx, pose.y - ay - by),
        (pose.x + ax - bx, pose.y + ay - by),
        (pose.x + ax + bx, pose.y + ay + by),
        (pose.x - ax + bx, pose.y - ay + by),
    ]
    return RotatedRect(np.array(verts), pose.theta)


def rect_iou(a: RotatedRect, b: RotatedRect) -> float:
    area_a, area_b = a.area(), b.area()
    if area_a == 0.0 or area_b == 0.0:
        return 0.0
    inter = _backend.convex_intersection_area(a.vertices, b.vertices)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def angle_delta(t1, t2):
    """Smallest difference between two jaw angles, which repeat every half turn."""
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True)
class Thresholds:
    iou: float = 0.25
    angle_deg: float = 30.0
    height_ratio: float = 0.5

    @property
    def angle_rad(self):
        return math.radians(self.angle_deg)

    def to_dict(self):
        return {"iou": self.iou, "angle_deg": self.angle_deg, "height_ratio": self.height_ratio}


def passes_thresholds(iou, delta, thresholds: Thresholds = Thresholds()):
    """An angle beyond the limit discards the grasp; otherwise IoU must exceed its limit."""
    if delta > thresholds.angle_rad:
        return False
    return iou > thresholds.iou


def grasp_correct(pred: GraspPose, gts: Sequence[RotatedRect], thresholds: Thresholds = Thresholds()) -> bool:
    if not gts:
        raise ValueError("grasp_correct needs at least one ground-truth rectangle")
    rect = pose_to_rect(pred, thresholds.height_ratio)
    for gt in gts:
        delta = angle_delta(pred.theta, gt.angle)
        if delta > thresholds.angle_rad:
            continue
        if rect_iou(rect, gt) > thresholds.iou:
            return True
    return False


def accuracy(predictions: Sequence[Optional[GraspPose]], gts: Sequence[Sequence[RotatedRect]],
             thresholds: Thresholds = Thresholds()) -> float:
    """Fraction of scenes whose top prediction is correct; ``None`` counts as a miss."""
    if len(gts) == 0:
        raise ValueError("accuracy over an empty dataset")
    if len(predictions) != len(gts):
        raise ValueError(f"{len(predictions)} predictions for {len(gts)} scenes")
    n_c = sum(1 for p, g in zip(predictions, gts) if p is not None and grasp_correct(p, g, thresholds))
    return n_c / len(gts)


# -- grasp map decoding -----------------------------------------------------

_NEIGHBORS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


def _peak_pixels(q):
    """Local maxima over 3x3 neighbourhoods; each flat-topped plateau yields
    its first pixel in row-major order."""
    from scipy.ndimage import maximum_filter

    h, w = q.shape
    not_below = q >= maximum_filter(q, size=3, mode="nearest")
    seen = np.zeros_like(not_below)
    peaks = []
    for y in range(h):
        for x in range(w):
            if not not_below[y, x] or seen[y, x]:
                continue
            value = q[y, x]
            stack, members, is_peak = [(y, x)], [], True
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                members.append((cy, cx))
                is_peak &= bool(not_below[cy, cx])
                for dy, dx in _NEIGHBORS:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx] and q[ny, nx] == value:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            if is_peak:
                peaks.append(min(members))
    return peaks


def decode_grasp_maps(maps: GraspMaps, top_k=1, blur=0) -> List[GraspPose]:
    """Rank grasp poses at the peaks of the quality map.

    ``blur`` > 1 box-filters the quality map with that window before peak
    finding; off by default.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    q = maps.quality
    if blur and blur > 1:
        from scipy.ndimage import uniform_filter

        q = np.clip(uniform_filter(q, size=int(blur), mode="nearest"), 0.0, 1.0)
    poses = []
    for y, x in _peak_pixels(q):
        width = min(max(maps.width[y, x] * maps.width_scale, 0.0), maps.w_max)
        poses.append(GraspPose(float(x), float(y), float(maps.angle[y, x]), width, float(q[y, x])))
    poses.sort(key=lambda p: (-p.quality, p.y, p.x))
    return poses[:top_k]
