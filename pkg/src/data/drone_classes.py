"""
ドローンクラス定義
機体サイズは設定上の既定値であり、実機の寸法ではない
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from matplotlib import colormaps

from ..interfaces.exceptions import ConfigurationError

CLASS_NAMES = ('Mini3', 'Mini2', 'Air3', 'Air2', 'Mav2', 'Mav3', 'Tello')
NUM_CLASSES = len(CLASS_NAMES)
NUM_KEYPOINTS = 4

# キーポイント順序: 前左, 前右, 後左, 後右
KEYPOINT_NAMES = ('front_left', 'front_right', 'rear_left', 'rear_right')


@dataclass(frozen=True)
class DroneClassSpec:
    """ドローンクラス（機体座標系のプロペラ配置を持つ）"""

    class_id: int
    name: str
    propeller_layout: np.ndarray
    body_extent: float

    def __post_init__(self):
        layout = np.asarray(self.propeller_layout, dtype=float)
        if layout.shape != (NUM_KEYPOINTS, 3):
            raise ConfigurationError(f"プロペラ配置は4点の3D座標である必要があります: {layout.shape}")
        if not np.allclose(layout.mean(axis=0), 0.0, atol=1e-9):
            raise ConfigurationError("プロペラ配置の重心は機体原点である必要があります")
        distances = np.linalg.norm(layout[:, None, :] - layout[None, :, :], axis=-1)
        if np.any(distances[np.triu_indices(NUM_KEYPOINTS, k=1)] <= 0):
            raise ConfigurationError("プロペラ配置の点は互いに異なる必要があります")
        if self.body_extent <= 0:
            raise ConfigurationError(f"body_extent は正である必要があります: {self.body_extent}")
        object.__setattr__(self, 'propeller_layout', layout)

    @property
    def color(self) -> Tuple[int, int, int]:
        """描画に使うクラス固有の機体色 (RGB)"""
        rgba = colormaps['tab10'](self.class_id % 10)
        return tuple(int(round(255 * c)) for c in rgba[:3])


def square_layout(side: float) -> np.ndarray:
    """一辺 side の正方形プロペラ配置（機体 x-y 平面、前方は -y）"""
    half = side / 2.0
    return np.array([
        [-half, -half, 0.0],  # front_left
        [half, -half, 0.0],   # front_right
        [-half, half, 0.0],   # rear_left
        [half, half, 0.0],    # rear_right
    ])


def default_class_specs(min_extent: float = 0.10, max_extent: float = 0.40) -> List[DroneClassSpec]:
    """7クラスの既定仕様（body_extent は class_id 順に狭義単調増加）"""
    extents = np.linspace(min_extent, max_extent, NUM_CLASSES)
    return [
        DroneClassSpec(
            class_id=class_id,
            name=name,
            propeller_layout=square_layout(float(extent)),
            body_extent=float(extent),
        )
        for class_id, (name, extent) in enumerate(zip(CLASS_NAMES, extents))
    ]


def get_class_spec(class_id: int) -> DroneClassSpec:
    if not 0 <= class_id < NUM_CLASSES:
        raise ConfigurationError(f"存在しないクラスIDです: {class_id}")
    return default_class_specs()[class_id]
