"""Pixel -> camera -> robot transforms for planar grasps.

The yaw composition assumes a top-down camera: its optical axis is parallel
to the robot approach axis, so a planar grasp angle only picks up the z-yaw
of the hand-eye rotation. Outside that configuration the returned yaw is
an approximation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .geometry import GraspPose, wrap_half_turn

_ORTHO_TOL = 1e-9


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise CalibrationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")


@dataclass(frozen=True, eq=False)
class HandEyePose:
    """Homogeneous camera-to-robot transform."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape == (16,):
            m = m.reshape(4, 4)
        if m.shape != (4, 4):
            raise CalibrationError(f"hand-eye matrix must be 4x4, got {m.shape}")
        if not np.isfinite(m).all():
            raise CalibrationError("hand-eye matrix has non-finite entries")
        if not np.allclose(m[3], [0, 0, 0, 1], rtol=0, atol=_ORTHO_TOL):
            raise CalibrationError("last row of the hand-eye matrix must be [0, 0, 0, 1]")
        r = m[:3, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
            raise CalibrationError("rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise CalibrationError("rotation block must have determinant +1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rotation(self):
        return self.matrix[:3, :3]

    @property
    def translation(self):
        return self.matrix[:3, 3]

    @classmethod
    def from_rt(cls, rotation, translation):
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def identity(cls):
        return cls(np.eye(4))

    def inverse(self):
        r = self.rotation
        return HandEyePose.from_rt(r.T, -r.T @ self.translation)

    def yaw(self):
        r = self.rotation
        return math.atan2(r[1, 0], r[0, 0])

    def __eq__(self, other):
        return isinstance(other, HandEyePose) and np.array_equal(self.matrix, other.matrix)


@dataclass(frozen=True)
class RobotGrasp:
    position: Tuple[float, float, float]
    yaw: float
    jaw_width: float
    quality: float

    def __post_init__(self):
        if self.jaw_width < 0:
            raise ValueError("jaw width must be >= 0")

    def to_dict(self):
        return {
            "position": list(self.position),
            "yaw": self.yaw,
            "jaw_width": self.jaw_width,
            "quality": self.quality,
        }


def pixel_to_camera(u, v, z, cam: CameraIntrinsics):
    if not z > 0:
        raise ValueError(f"depth must be positive, got {z}")
    return ((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, float(z))


def camera_to_pixel(p, cam: CameraIntrinsics):
    x, y, z = p
    if not z > 0:
        raise ValueError(f"point behind the camera (z={z})")
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy)


def camera_to_robot(p, T: HandEyePose):
    return tuple(float(c) for c in T.rotation @ np.asarray(p, dtype=np.float64) + T.translation)


def grasp_to_robot(g: GraspPose, depth, cam: CameraIntrinsics, T: HandEyePose) -> RobotGrasp:
    position = camera_to_robot(pixel_to_camera(g.x, g.y, depth, cam), T)
    yaw = wrap_half_turn(g.theta + T.yaw())
    return RobotGrasp(position, yaw, g.width * depth / cam.fx, g.quality)


def calibration_from_dict(d):
    try:
        cam = CameraIntrinsics(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))
        t_rc = d["T_rc"]
    except KeyError as exc:
        raise CalibrationError(f"calibration is missing {exc.args[0]!r}") from None
    if len(t_rc) != 16:
        raise CalibrationError(f"T_rc must have 16 row-major entries, got {len(t_rc)}")
    return cam, HandEyePose(np.array(t_rc, dtype=np.float64).reshape(4, 4))


def calibration_to_dict(cam: CameraIntrinsics, T: HandEyePose):
    return {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy, "T_rc": T.matrix.reshape(-1).tolist()}


def load_calibration(path):
    with open(path) as fh:
        return calibration_from_dict(json.load(fh))
