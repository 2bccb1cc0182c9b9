"""
シーン設定と飛行軌跡の生成
直線運動（等速並進・一定角速度）と非直線運動（リサージュ曲線・時変回転）を扱う
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..geometry.camera import CameraIntrinsics
from ..geometry.pose import RigidPose
from ..geometry.rotations import euler_norm_to_matrix
from ..interfaces.exceptions import ConfigurationError

MOTION_KINDS = ('linear', 'non-linear')

# 機体の傾き（x, y 軸まわり）の上限。平面配置が真横を向くのを避ける
MAX_TILT_RAD = 0.7


@dataclass
class SceneConfig:
    """1つのサブシーケンスを生成するためのシーン設定"""

    scene_id: str
    motion_kind: str
    duration: float
    fps: float
    backgrounds: List[int]
    camera: CameraIntrinsics
    rng_seed: int
    resolution: Tuple[int, int] = (128, 128)
    depth_range: Tuple[float, float] = (0.8, 2.0)

    def __post_init__(self):
        if self.motion_kind not in MOTION_KINDS:
            raise ConfigurationError(f"サポートされていない運動種別: {self.motion_kind}")
        if self.duration <= 0 or self.fps <= 0:
            raise ConfigurationError(f"duration と fps は正である必要があります: {self.duration}, {self.fps}")
        if len(self.backgrounds) < 1:
            raise ConfigurationError("背景は1つ以上必要です")
        near, far = self.depth_range
        if not 0.5 < near < far:
            raise ConfigurationError(f"奥行き範囲が不正です: {self.depth_range}")
        self.resolution = (int(self.resolution[0]), int(self.resolution[1]))

    @property
    def frame_count(self) -> int:
        return frame_count(self.duration, self.fps)


def frame_count(duration: float, fps: float) -> int:
    """duration·fps が整数であることを確認してフレーム数を返す"""
    frames = duration * fps
    rounded = int(round(frames))
    if abs(frames - rounded) > 1e-9:
        raise ConfigurationError(f"duration·fps が整数になりません: {duration} * {fps}")
    return rounded


def _lateral_limits(cfg: SceneConfig) -> Tuple[float, float]:
    """最も手前の奥行きで画像内に収まる横方向の振れ幅（メートル）"""
    width, height = cfg.resolution
    near = cfg.depth_range[0]
    frac_x = 0.5 * min(cfg.camera.cx, width - cfg.camera.cx) / cfg.camera.fx
    frac_y = 0.5 * min(cfg.camera.cy, height - cfg.camera.cy) / cfg.camera.fy
    return near * frac_x, near * frac_y


def _linear_states(cfg: SceneConfig, rng: np.random.Generator, times: np.ndarray):
    near, far = cfg.depth_range
    span = far - near
    limit_x, limit_y = _lateral_limits(cfg)
    duration = cfg.duration

    start = np.array([
        rng.uniform(-limit_x / 2, limit_x / 2),
        rng.uniform(-limit_y / 2, limit_y / 2),
        rng.uniform(near + 0.25 * span, far - 0.25 * span),
    ])
    velocity = np.array([
        rng.uniform(-1, 1) * (limit_x / 2) / duration,
        rng.uniform(-1, 1) * (limit_y / 2) / duration,
        rng.uniform(-1, 1) * (0.25 * span) / duration,
    ])
    angles0 = np.array([
        rng.uniform(-MAX_TILT_RAD / 2, MAX_TILT_RAD / 2),
        rng.uniform(-MAX_TILT_RAD / 2, MAX_TILT_RAD / 2),
        rng.uniform(0, 2 * np.pi),
    ])
    rates = np.array([
        rng.uniform(-1, 1) * (MAX_TILT_RAD / 2) / duration,
        rng.uniform(-1, 1) * (MAX_TILT_RAD / 2) / duration,
        rng.uniform(-1, 1) * np.pi / duration,
    ])

    positions = start[None, :] + times[:, None] * velocity[None, :]
    angles = angles0[None, :] + times[:, None] * rates[None, :]
    return positions, angles


def _lissajous_states(cfg: SceneConfig, rng: np.random.Generator, times: np.ndarray):
    near, far = cfg.depth_range
    limit_x, limit_y = _lateral_limits(cfg)
    center_z = 0.5 * (near + far)
    amplitude = np.array([
        rng.uniform(0.5, 1.0) * limit_x,
        rng.uniform(0.5, 1.0) * limit_y,
        rng.uniform(0.5, 1.0) * 0.45 * (far - near),
    ])
    frequency = rng.uniform(0.1, 0.4, size=3)
    phase = rng.uniform(0, 2 * np.pi, size=3)
    positions = amplitude[None, :] * np.sin(2 * np.pi * frequency[None, :] * times[:, None] + phase[None, :])
    positions[:, 2] += center_z

    tilt_amplitude = rng.uniform(0.2, MAX_TILT_RAD, size=2)
    tilt_frequency = rng.uniform(0.1, 0.5, size=2)
    tilt_phase = rng.uniform(0, 2 * np.pi, size=2)
    tilts = tilt_amplitude[None, :] * np.sin(
        2 * np.pi * tilt_frequency[None, :] * times[:, None] + tilt_phase[None, :]
    )
    yaw0 = rng.uniform(0, 2 * np.pi)
    yaw_rate = rng.uniform(-1, 1) * np.pi / cfg.duration
    yaw_wobble = rng.uniform(0.1, 0.5)
    yaw = yaw0 + yaw_rate * times + yaw_wobble * np.sin(2 * np.pi * tilt_frequency[0] * times)
    angles = np.column_stack([tilts, yaw])
    return positions, angles


def synth_trajectory(cfg: SceneConfig) -> List[RigidPose]:
    """
    シーン設定から duration·fps 個の姿勢列を生成

    Args:
        cfg: シーン設定（rng_seed により決定的）

    Returns:
        カメラ座標系の姿勢リスト
    """
    rng = np.random.default_rng(cfg.rng_seed)
    times = np.arange(cfg.frame_count) / cfg.fps

    if cfg.motion_kind == 'linear':
        positions, angles = _linear_states(cfg, rng, times)
    else:
        positions, angles = _lissajous_states(cfg, rng, times)

    rotations = euler_norm_to_matrix(angles / (2 * np.pi))
    return [RigidPose(rotation, position) for rotation, position in zip(rotations, positions)]
