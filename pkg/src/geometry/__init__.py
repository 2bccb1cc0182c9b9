"""
幾何パッケージ（カメラモデル・回転表現・剛体変換）
"""

from .camera import CameraIntrinsics, pixel_to_ray, project_point
from .rotations import (
    euler_norm_to_matrix,
    is_rotation_matrix,
    matrix_to_euler_norm,
    relative_rotation_angle,
)
from .pose import PoseEstimate, RigidPose, transform_points

__all__ = [
    'CameraIntrinsics',
    'pixel_to_ray',
    'project_point',
    'euler_norm_to_matrix',
    'is_rotation_matrix',
    'matrix_to_euler_norm',
    'relative_rotation_angle',
    'PoseEstimate',
    'RigidPose',
    'transform_points',
]
