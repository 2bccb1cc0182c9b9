"""
ピンホールカメラモデル
画素とレイ方向ベクトルの相互変換を提供する
"""
import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..interfaces.exceptions import BehindCameraError, ConfigurationError


@dataclass(frozen=True)
class CameraIntrinsics:
    """カメラ内部パラメータ（焦点距離・主点、単位はピクセル）"""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(math.isfinite(float(v)) for v in values):
            raise ConfigurationError(f"内部パラメータに有限でない値があります: {values}")
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigurationError(f"焦点距離は正である必要があります: fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 の内部パラメータ行列 A"""
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self) -> np.ndarray:
        """A の逆行列（特異な場合は ConfigurationError）"""
        try:
            inverse = np.linalg.inv(self.matrix)
        except np.linalg.LinAlgError as e:
            raise ConfigurationError(f"内部パラメータ行列が正則ではありません: {e}") from e
        if not np.all(np.isfinite(inverse)):
            raise ConfigurationError("内部パラメータ行列の逆行列が有限ではありません")
        return inverse

    @classmethod
    def from_field_of_view(cls, width: int, height: int, fov_deg: float = 60.0) -> "CameraIntrinsics":
        """水平画角と解像度から内部パラメータを作成"""
        focal = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0)

    def to_dict(self) -> Dict[str, float]:
        # マニフェストには小数6桁で保存する
        return {
            'fx': round(float(self.fx), 6),
            'fy': round(float(self.fy), 6),
            'cx': round(float(self.cx), 6),
            'cy': round(float(self.cy), 6),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CameraIntrinsics":
        try:
            return cls(fx=float(data['fx']), fy=float(data['fy']),
                       cx=float(data['cx']), cy=float(data['cy']))
        except KeyError as e:
            raise ConfigurationError(f"内部パラメータのフィールドがありません: {e}") from e


def pixel_to_ray(K: CameraIntrinsics, p) -> np.ndarray:
    """
    画素座標を単位長のレイ方向ベクトルに変換

    Args:
        K: カメラ内部パラメータ
        p: 画素座標 (..., 2)

    Returns:
        A^-1 [p, 1]^T を単位ノルムに正規化したベクトル (..., 3)
    """
    pixels = np.asarray(p, dtype=float)
    if pixels.shape[-1] != 2:
        raise ConfigurationError(f"画素座標の最後の次元は2である必要があります: {pixels.shape}")
    homogeneous = np.concatenate([pixels, np.ones(pixels.shape[:-1] + (1,))], axis=-1)
    rays = homogeneous @ K.inverse_matrix().T
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def project_point(K: CameraIntrinsics, x) -> np.ndarray:
    """
    カメラ座標系の3D点を画素座標に投影

    Args:
        K: カメラ内部パラメータ
        x: カメラ座標系の点 (..., 3)、単位はメートル

    Returns:
        (fx * x / z + cx, fy * y / z + cy)
    """
    points = np.asarray(x, dtype=float)
    z = points[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError(f"カメラ後方の点は投影できません: z={np.min(z)}")
    u = K.fx * points[..., 0] / z + K.cx
    v = K.fy * points[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)
