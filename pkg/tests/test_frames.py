import math

import numpy as np
import pytest

from detgrasp.frames import (
    CalibrationError,
    CameraIntrinsics,
    HandEyePose,
    calibration_from_dict,
    calibration_to_dict,
    camera_to_pixel,
    camera_to_robot,
    grasp_to_robot,
    load_calibration,
    pixel_to_camera,
)
from detgrasp.geometry import GraspPose, angle_delta

CAM = CameraIntrinsics(600.0, 610.0, 320.0, 240.0)


def rot_z(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def random_pose(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return HandEyePose.from_rt(q, rng.uniform(-1, 1, 3))


class TestPixelToCamera:
    def test_principal_ray(self):
        assert pixel_to_camera(320, 240, 2.0, CAM) == (0.0, 0.0, 2.0)

    def test_substitution(self):
        assert pixel_to_camera(920, 240, 1.0, CAM)[0] == 1.0

    def test_homogeneous_in_depth(self):
        a = pixel_to_camera(400, 100, 0.7, CAM)
        b = pixel_to_camera(400, 100, 1.4, CAM)
        assert b[0] == pytest.approx(2 * a[0]) and b[1] == pytest.approx(2 * a[1])

    def test_projection_round_trip(self, rng):
        for _ in range(200):
            u, v, z = rng.uniform(0, 640), rng.uniform(0, 480), rng.uniform(0.1, 5)
            uu, vv = camera_to_pixel(pixel_to_camera(u, v, z, CAM), CAM)
            assert uu == pytest.approx(u, abs=1e-9) and vv == pytest.approx(v, abs=1e-9)

    def test_bad_depth(self):
        with pytest.raises(ValueError):
            pixel_to_camera(1, 1, 0.0, CAM)
        with pytest.raises(CalibrationError):
            CameraIntrinsics(0.0, 1.0, 0, 0)


class TestCameraToRobot:
    def test_identity(self):
        assert camera_to_robot((0.1, -0.2, 0.3), HandEyePose.identity()) == (0.1, -0.2, 0.3)

    def test_translation(self):
        T = HandEyePose.from_rt(np.eye(3), [0, 0, 0.5])
        assert camera_to_robot((1.0, 2.0, 3.0), T) == (1.0, 2.0, 3.5)

    def test_inverse_round_trip_and_isometry(self, rng):
        for _ in range(100):
            T = random_pose(rng)
            p, q = rng.standard_normal(3), rng.standard_normal(3)
            back = camera_to_robot(camera_to_robot(p, T), T.inverse())
            np.testing.assert_allclose(back, p, atol=1e-9)
            d0 = np.linalg.norm(p - q)
            d1 = np.linalg.norm(np.subtract(camera_to_robot(p, T), camera_to_robot(q, T)))
            assert d1 == pytest.approx(d0, abs=1e-9)

    def test_rejects_non_rigid(self):
        m = np.eye(4)
        m[0, 0] = 1.01
        with pytest.raises(CalibrationError):
            HandEyePose(m)
        m = np.eye(4)
        m[0, 0] = -1  # reflection
        with pytest.raises(CalibrationError):
            HandEyePose(m)


class TestGraspToRobot:
    def test_identity_chain(self):
        g = GraspPose(320, 240, 0.4, 30, 0.9)
        r = grasp_to_robot(g, 1.0, CAM, HandEyePose.identity())
        assert r.position == (0.0, 0.0, 1.0)
        assert r.yaw == pytest.approx(0.4, abs=1e-15) and r.quality == 0.9

    def test_jaw_width(self):
        g = GraspPose(100, 100, 0.0, 60, 0.5)
        assert grasp_to_robot(g, 0.5, CAM, HandEyePose.identity()).jaw_width == pytest.approx(0.05, abs=1e-15)

    def test_yaw_follows_z_rotation(self, rng):
        for _ in range(100):
            theta = rng.uniform(-math.pi / 2, math.pi / 2)
            phi = rng.uniform(-math.pi, math.pi)
            T = HandEyePose.from_rt(rot_z(phi), rng.uniform(-1, 1, 3))
            r = grasp_to_robot(GraspPose(300, 200, theta, 20, 0.5), 0.8, CAM, T)
            # oracle: rotate the jaw axis vector and read its planar direction
            axis = rot_z(phi) @ np.array([math.cos(theta), math.sin(theta), 0.0])
            assert angle_delta(r.yaw, math.atan2(axis[1], axis[0])) == pytest.approx(0.0, abs=1e-9)
            assert -math.pi / 2 <= r.yaw <= math.pi / 2

    def test_yaw_range_any_pose(self, rng):
        for _ in range(100):
            r = grasp_to_robot(GraspPose(10, 10, rng.uniform(-1.5, 1.5), 5, 0.5), 1.0, CAM, random_pose(rng))
            assert -math.pi / 2 <= r.yaw <= math.pi / 2


class TestCalibrationFile:
    def test_round_trip(self, fixtures):
        cam, T = load_calibration(fixtures / "calib.json")
        assert cam.fx == 600.0
        assert calibration_from_dict(calibration_to_dict(cam, T)) == (cam, T)

    def test_validation(self):
        with pytest.raises(CalibrationError):
            calibration_from_dict({"fx": 1, "fy": 1, "cx": 0, "cy": 0, "T_rc": [1, 0, 0]})
        with pytest.raises(CalibrationError):
            calibration_from_dict({"fx": 1, "fy": 1, "cx": 0})
