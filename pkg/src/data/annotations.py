"""
フレーム単位のアノテーションとサンプル
アノテーションは1フレーム1行の JSON レコードとして保存し、浮動小数は小数6桁に丸める
"""
import json
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..geometry.camera import CameraIntrinsics, project_point
from ..geometry.pose import RigidPose
from ..geometry.rotations import orthonormalize

FLOAT_DIGITS = 6
REPROJECTION_TOLERANCE_PX = 0.5


def _rounded(values) -> list:
    return np.round(np.asarray(values, dtype=float), FLOAT_DIGITS).tolist()


@dataclass
class Annotation:
    """1フレーム分の正解アノテーション"""

    keypoints_2d: np.ndarray
    keypoints_3d: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    euler_norm: np.ndarray
    class_id: int
    bbox: np.ndarray
    intrinsics: CameraIntrinsics
    frame_index: int
    scene_id: str = ''
    background_id: int = 0

    def __post_init__(self):
        self.keypoints_2d = np.asarray(self.keypoints_2d, dtype=float).reshape(4, 2)
        self.keypoints_3d = np.asarray(self.keypoints_3d, dtype=float).reshape(4, 3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        self.euler_norm = np.asarray(self.euler_norm, dtype=float).reshape(3)
        self.bbox = np.asarray(self.bbox, dtype=float).reshape(4)

    @property
    def pose(self) -> RigidPose:
        # 丸めた回転行列は直交性が 1e-6 をわずかに超えうるので射影し直す
        return RigidPose(orthonormalize(self.rotation), self.translation)

    def reprojection_error(self) -> float:
        """keypoints_2d と keypoints_3d の再投影との最大誤差（ピクセル）"""
        projected = project_point(self.intrinsics, self.keypoints_3d)
        return float(np.max(np.linalg.norm(projected - self.keypoints_2d, axis=-1)))

    def passes_reprojection_check(self, tolerance: float = REPROJECTION_TOLERANCE_PX) -> bool:
        return self.reprojection_error() <= tolerance

    def to_record(self) -> Dict[str, Any]:
        return {
            'frame_index': int(self.frame_index),
            'scene_id': self.scene_id,
            'class_id': int(self.class_id),
            'background_id': int(self.background_id),
            'keypoints_2d': _rounded(self.keypoints_2d),
            'keypoints_3d': _rounded(self.keypoints_3d),
            'rotation': _rounded(self.rotation),
            'translation': _rounded(self.translation),
            'euler_norm': _rounded(self.euler_norm),
            'bbox': _rounded(self.bbox),
            'intrinsics': self.intrinsics.to_dict(),
            # カメラは世界原点に固定（外部パラメータは単位姿勢）
            'extrinsics': {'rotation': np.eye(3).tolist(), 'translation': [0.0, 0.0, 0.0]},
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Annotation":
        return cls(
            keypoints_2d=record['keypoints_2d'],
            keypoints_3d=record['keypoints_3d'],
            rotation=record['rotation'],
            translation=record['translation'],
            euler_norm=record['euler_norm'],
            class_id=int(record['class_id']),
            bbox=record['bbox'],
            intrinsics=CameraIntrinsics.from_dict(record['intrinsics']),
            frame_index=int(record['frame_index']),
            scene_id=str(record.get('scene_id', '')),
            background_id=int(record.get('background_id', 0)),
        )

    def to_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> "Annotation":
        return cls.from_record(json.loads(line))


@dataclass
class Sample:
    """画像とアノテーションの組"""

    image: np.ndarray
    annotation: Annotation
    index: int = 0
    image_path: Optional[str] = None
