"""Detection-grasp fusion: attention kernels, grasp metrics, frame
transforms and box-coordinate matching of grasps to detected objects."""
from ._backend import BACKEND
from .attention import AsppConfig, CamParams, SamParams, aspp_forward, cam_forward, sam_forward
from .dgbcm import (
    DetectionBox,
    DetectionSet,
    LabelNotFound,
    MatchResult,
    NoGraspInBox,
    dgbcm_select,
    index_detections,
    point_in_box,
)
from .frames import CameraIntrinsics, HandEyePose, RobotGrasp, grasp_to_robot
from .geometry import GraspMaps, GraspPose, RotatedRect, Thresholds, decode_grasp_maps, grasp_correct, rect_iou
from .gradcheck import DiffOp, grad_check

__version__ = "0.1.0"
