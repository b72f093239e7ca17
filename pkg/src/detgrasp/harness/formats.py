"""JSON interchange formats.

Every top-level document carries ``"format_version": 1``. Output is written
with sorted keys and a trailing newline so identical inputs give identical
bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..dgbcm import DetectionBox, DomainError
from ..geometry import GraspMaps, GraspPose, RotatedRect

FORMAT_VERSION = 1


class FormatError(DomainError):
    kind = "ParseError"


def check_version(d):
    if not isinstance(d, dict):
        raise FormatError(f"expected a JSON object, got {type(d).__name__}")
    v = d.get("format_version")
    if v != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {v!r} (expected {FORMAT_VERSION})")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def _wrap(fn, what):
    try:
        return fn()
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed {what}: {exc!r}") from None


# -- tensors ----------------------------------------------------------------


def tensor_to_json(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}


def tensor_from_json(d):
    shape = [int(s) for s in d["shape"]]
    data = np.asarray(d["data"], dtype=np.float64)
    if data.size != int(np.prod(shape)):
        raise FormatError(f"tensor data has {data.size} values for shape {shape}")
    return data.reshape(shape)


# -- detections and grasps ----------------------------------------------------


def detections_to_dict(boxes, image_size):
    w, h = image_size
    return {
        "format_version": FORMAT_VERSION,
        "image": {"width": w, "height": h},
        "detections": [b.to_dict() for b in boxes],
    }


def detections_from_dict(d):
    check_version(d)

    def parse():
        image = d.get("image")
        size = None if image is None else (image["width"], image["height"])
        return size, [DetectionBox.from_dict(b) for b in d["detections"]]

    return _wrap(parse, "detections")


def grasps_to_dict(grasps):
    return {"format_version": FORMAT_VERSION, "grasps": [g.to_dict() for g in grasps]}


def grasps_from_dict(d):
    check_version(d)
    return _wrap(lambda: [GraspPose.from_dict(g) for g in d["grasps"]], "grasps")


# -- scenes -----------------------------------------------------------------


@dataclass(frozen=True)
class SceneRecord:
    """One image's detections, grasp candidates (or maps) and ground truth."""

    scene_id: str
    image_size: Tuple[int, int]
    detections: Tuple[DetectionBox, ...]
    ground_truth: Dict[str, Tuple[RotatedRect, ...]]
    grasp_candidates: Optional[Tuple[GraspPose, ...]] = None
    grasp_maps: Optional[GraspMaps] = None
    target: Optional[str] = None
    planted_best: Optional[Tuple[str, GraspPose]] = None
    seed: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "ground_truth", {k: tuple(v) for k, v in self.ground_truth.items()})
        if self.grasp_candidates is not None:
            object.__setattr__(self, "grasp_candidates", tuple(self.grasp_candidates))
        if (self.grasp_candidates is None) == (self.grasp_maps is None):
            raise ValueError("a scene holds exactly one of grasp_candidates or grasp_maps")
        w, h = self.image_size
        for b in self.detections:
            if b.x1 < 0 or b.y1 < 0 or b.x2 > w or b.y2 > h:
                raise ValueError(f"detection {b} outside the {w}x{h} image")
        for g in self.grasp_candidates or ():
            if not (0 <= g.x <= w and 0 <= g.y <= h):
                raise ValueError(f"grasp centre ({g.x}, {g.y}) outside the {w}x{h} image")
        if self.grasp_maps is not None and self.grasp_maps.quality.shape != (h, w):
            raise ValueError(f"grasp maps {self.grasp_maps.quality.shape} do not match image {h}x{w}")

    def to_dict(self):
        d = {
            "id": self.scene_id,
            "image": {"width": self.image_size[0], "height": self.image_size[1]},
            "detections": [b.to_dict() for b in self.detections],
            "ground_truth": {k: [r.to_dict() for r in v] for k, v in self.ground_truth.items()},
        }
        if self.grasp_candidates is not None:
            d["grasps"] = [g.to_dict() for g in self.grasp_candidates]
        else:
            d["grasp_maps"] = self.grasp_maps.to_dict()
        if self.target is not None:
            d["target"] = self.target
        if self.planted_best is not None:
            d["planted_best"] = {"label": self.planted_best[0], "grasp": self.planted_best[1].to_dict()}
        if self.seed is not None:
            d["seed"] = list(self.seed)
        return d

    @classmethod
    def from_dict(cls, d):
        def parse():
            planted = d.get("planted_best")
            return cls(
                scene_id=str(d["id"]),
                image_size=(d["image"]["width"], d["image"]["height"]),
                detections=[DetectionBox.from_dict(b) for b in d["detections"]],
                ground_truth={k: [RotatedRect.from_dict(r) for r in v] for k, v in d.get("ground_truth", {}).items()},
                grasp_candidates=[GraspPose.from_dict(g) for g in d["grasps"]] if "grasps" in d else None,
                grasp_maps=GraspMaps.from_dict(d["grasp_maps"]) if "grasp_maps" in d else None,
                target=d.get("target"),
                planted_best=None if planted is None else (planted["label"], GraspPose.from_dict(planted["grasp"])),
                seed=None if d.get("seed") is None else tuple(d["seed"]),
            )

        return _wrap(parse, f"scene {d.get('id', '?') if isinstance(d, dict) else '?'}")


def scenes_to_dict(scenes, meta=None):
    d = {"format_version": FORMAT_VERSION, "scenes": [s.to_dict() for s in scenes]}
    if meta:
        d["meta"] = meta
    return d


def scenes_from_dict(d) -> List[SceneRecord]:
    check_version(d)
    return _wrap(lambda: [SceneRecord.from_dict(s) for s in d["scenes"]], "scenes file")
