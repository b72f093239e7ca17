"""Box-coordinate matching between detections and grasp candidates.

Detections are grouped into a label -> boxes dictionary. For a requested
label, every grasp candidate whose centre lies inside one of that label's
boxes is kept and the single highest-quality one is returned.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .geometry import GraspPose


class DomainError(Exception):
    """Base for errors a caller is expected to handle (exit code 2 at the CLI)."""

    kind = "DomainError"

    def __init__(self, detail):
        super().__init__(detail)
        self.detail = detail


class LabelNotFound(DomainError):
    kind = "LabelNotFound"


class NoGraspInBox(DomainError):
    kind = "NoGraspInBox"


class MalformedBox(DomainError):
    kind = "MalformedBox"


@dataclass(frozen=True)
class DetectionBox:
    label: str
    score: float
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("box label must be a non-empty string")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"box corners out of order: ({self.x1}, {self.y1}) / ({self.x2}, {self.y2})")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"box score {self.score} outside [0, 1]")

    def sort_key(self):
        return (-self.score, self.x1, self.y1, self.x2, self.y2)

    def to_dict(self):
        return {"label": self.label, "score": self.score,
                "box": {"x1": self.x1, "y1": self.y1, "x2": self.x2, "y2": self.y2}}

    @classmethod
    def from_dict(cls, d):
        b = d["box"]
        return cls(d["label"], float(d["score"]), float(b["x1"]), float(b["y1"]), float(b["x2"]), float(b["y2"]))


class DetectionSet(Mapping):
    """Read-only ``label -> tuple of boxes`` in first-seen order."""

    def __init__(self, groups: Optional[Dict[str, Sequence[DetectionBox]]] = None):
        self._groups = {k: tuple(v) for k, v in (groups or {}).items()}
        for label, boxes in self._groups.items():
            for b in boxes:
                if b.label != label:
                    raise ValueError(f"box labelled {b.label!r} filed under {label!r}")

    def __getitem__(self, label):
        return self._groups[label]

    def __iter__(self):
        return iter(self._groups)

    def __len__(self):
        return len(self._groups)

    def __repr__(self):
        return f"DetectionSet({self._groups!r})"

    def boxes(self):
        return [b for group in self._groups.values() for b in group]


def index_detections(boxes: Sequence) -> DetectionSet:
    groups: Dict[str, List[DetectionBox]] = {}
    for n, box in enumerate(boxes):
        if not isinstance(box, DetectionBox):
            try:
                box = DetectionBox(*box) if isinstance(box, (tuple, list)) else DetectionBox.from_dict(box)
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedBox(f"detection {n}: {exc}") from None
        groups.setdefault(box.label, []).append(box)
    return DetectionSet(groups)


def point_in_box(x, y, box: DetectionBox) -> bool:
    return box.x1 <= x <= box.x2 and box.y1 <= y <= box.y2


@dataclass(frozen=True)
class MatchResult:
    selected: GraspPose
    matched_box: DetectionBox
    candidates_considered: int
    discarded: int
    per_instance_best: Tuple[Tuple[DetectionBox, Optional[GraspPose]], ...] = field(default=(), compare=False)

    def to_dict(self, label=None):
        d = {
            "selected": self.selected.to_dict(),
            "matched_box": self.matched_box.to_dict(),
            "candidates_considered": self.candidates_considered,
            "discarded": self.discarded,
            "per_instance_best": [
                {"box": b.to_dict(), "best": None if g is None else g.to_dict()} for b, g in self.per_instance_best
            ],
        }
        if label is not None:
            d["target"] = label
        return d


def dgbcm_select(detections: DetectionSet, candidates: Sequence[GraspPose], target_label: str) -> MatchResult:
    if target_label not in detections:
        raise LabelNotFound(f"no detection labelled {target_label!r}; available: {sorted(detections)}")
    # box order must not influence which box is reported
    boxes = sorted(detections[target_label], key=DetectionBox.sort_key)
    ranked = sorted(candidates, key=GraspPose.sort_key)
    matched = []
    for g in ranked:
        for b in boxes:
            if point_in_box(g.x, g.y, b):
                matched.append((g, b))
                break
    if not matched:
        raise NoGraspInBox(
            f"none of {len(candidates)} grasp centres lies inside the {len(boxes)} {target_label!r} box(es)"
        )
    per_instance = []
    for b in boxes:
        best = next((g for g in ranked if point_in_box(g.x, g.y, b)), None)
        per_instance.append((b, best))
    best, box = matched[0]
    return MatchResult(best, box, len(matched), len(matched) - 1, tuple(per_instance))
