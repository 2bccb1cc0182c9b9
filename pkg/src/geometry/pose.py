"""
剛体姿勢と姿勢推定値
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..interfaces.exceptions import ConfigurationError
from .rotations import euler_norm_to_matrix, is_rotation_matrix, matrix_to_euler_norm


@dataclass(frozen=True)
class RigidPose:
    """カメラ座標系における剛体姿勢（回転行列と並進、単位はメートル）"""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=float)
        translation = np.asarray(self.translation, dtype=float).reshape(-1)
        if not is_rotation_matrix(rotation):
            raise ConfigurationError("姿勢の回転が有効な回転行列ではありません")
        if translation.shape != (3,) or not np.all(np.isfinite(translation)):
            raise ConfigurationError(f"並進は有限な3ベクトルである必要があります: {translation}")
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler_norm(cls, r, translation) -> "RigidPose":
        return cls(euler_norm_to_matrix(r), translation)

    @property
    def euler_norm(self) -> np.ndarray:
        return matrix_to_euler_norm(self.rotation)


def transform_points(pose: RigidPose, pts_body) -> np.ndarray:
    """機体座標系の点をカメラ座標系へ変換 (R·p + t)"""
    points = np.asarray(pts_body, dtype=float)
    return points @ pose.rotation.T + pose.translation


@dataclass
class PoseEstimate:
    """姿勢推定値（正規化オイラー角 r と並進 t）"""

    r: np.ndarray
    t: np.ndarray
    class_id: Optional[int] = None
    keypoints_2d: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(3)
        self.t = np.asarray(self.t, dtype=float).reshape(3)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return euler_norm_to_matrix(self.r)

    def to_rigid_pose(self) -> RigidPose:
        return RigidPose(self.rotation_matrix, self.t)
