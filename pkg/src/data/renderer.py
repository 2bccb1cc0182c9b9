"""
手続き的なフレーム描画
シード付きの背景テクスチャの上に、機体・アーム・プロペラの記号を描く
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from PIL import Image, ImageDraw
from scipy.ndimage import gaussian_filter

from ..geometry.camera import project_point
from ..geometry.pose import RigidPose, transform_points
from ..geometry.rotations import matrix_to_euler_norm
from ..interfaces.exceptions import VisibilityError
from .annotations import Annotation
from .drone_classes import DroneClassSpec
from .trajectory import SceneConfig

# キーポイント順（前左, 前右, 後左, 後右）の描画色
KEYPOINT_COLORS = (
    (230, 50, 50),
    (50, 200, 60),
    (60, 90, 230),
    (240, 220, 40),
)


@lru_cache(maxsize=64)
def _background_texture(seed: int, width: int, height: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    # 空と地面の2色 + 低周波ノイズ
    sky = rng.uniform(90, 220, size=3)
    ground = rng.uniform(30, 160, size=3)
    horizon = rng.uniform(0.3, 0.7) * height
    rows = np.arange(height)[:, None, None]
    blend = 1.0 / (1.0 + np.exp(-(rows - horizon) / (0.02 * height + 1e-9)))
    base = (1.0 - blend) * sky[None, None, :] + blend * ground[None, None, :]

    noise = rng.standard_normal((height, width, 3))
    smooth = gaussian_filter(noise, sigma=(height / 24.0, width / 24.0, 0))
    smooth /= np.max(np.abs(smooth)) + 1e-12
    texture = base + 40.0 * smooth
    return np.clip(texture, 0, 255).astype(np.uint8)


def background_image(seed: int, resolution: Tuple[int, int]) -> np.ndarray:
    """背景シードから決定的な背景画像を作成 (H, W, 3)"""
    width, height = resolution
    return _background_texture(int(seed), int(width), int(height)).copy()


def glyph_radius(cfg: SceneConfig, spec: DroneClassSpec, depth: float) -> float:
    """プロペラ記号の半径（ピクセル）"""
    return max(1.0, 0.25 * spec.body_extent * cfg.camera.fx / depth)


def render_frame(cfg: SceneConfig, pose: RigidPose, spec: DroneClassSpec, frame_idx: int,
                 background_index: int = 0, background_id: int = 0) -> Tuple[np.ndarray, Annotation]:
    """
    1フレームを描画し、アノテーションを作成

    Args:
        cfg: シーン設定
        pose: 機体の姿勢（カメラ座標系）
        spec: ドローンクラス
        frame_idx: フレーム番号
        background_index: cfg.backgrounds 内の背景の位置
        background_id: アノテーションに記録する背景ID

    Returns:
        (画像 (H, W, 3) uint8, アノテーション)
    """
    keypoints_3d = transform_points(pose, spec.propeller_layout)
    if np.any(keypoints_3d[:, 2] <= 0) or pose.translation[2] <= 0:
        raise VisibilityError(
            f"カメラ後方のプロペラがあります (scene={cfg.scene_id}, frame={frame_idx})"
        )
    keypoints_2d = project_point(cfg.camera, keypoints_3d)
    center_2d = project_point(cfg.camera, pose.translation)

    depth = float(pose.translation[2])
    radius = glyph_radius(cfg, spec, depth)
    body_radius = max(1.0, 0.2 * spec.body_extent * cfg.camera.fx / depth)

    image = Image.fromarray(background_image(cfg.backgrounds[background_index], cfg.resolution))
    draw = ImageDraw.Draw(image)
    arm_color = tuple(int(0.6 * c) for c in spec.color)
    arm_width = max(1, int(round(radius / 2)))
    for point in keypoints_2d:
        draw.line([tuple(center_2d), tuple(point)], fill=arm_color, width=arm_width)
    cx, cy = center_2d
    draw.ellipse([cx - body_radius, cy - body_radius, cx + body_radius, cy + body_radius], fill=spec.color)
    for (u, v), color in zip(keypoints_2d, KEYPOINT_COLORS):
        draw.ellipse([u - radius, v - radius, u + radius, v + radius], fill=color)

    bbox = np.array([
        keypoints_2d[:, 0].min() - radius,
        keypoints_2d[:, 1].min() - radius,
        keypoints_2d[:, 0].max() + radius,
        keypoints_2d[:, 1].max() + radius,
    ])
    annotation = Annotation(
        keypoints_2d=keypoints_2d,
        keypoints_3d=keypoints_3d,
        rotation=pose.rotation,
        translation=pose.translation,
        euler_norm=matrix_to_euler_norm(pose.rotation),
        class_id=spec.class_id,
        bbox=bbox,
        intrinsics=cfg.camera,
        frame_index=frame_idx,
        scene_id=cfg.scene_id,
        background_id=background_id,
    )
    return np.asarray(image), annotation
