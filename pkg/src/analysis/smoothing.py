"""
姿勢トラックの時間方向ガウス平滑化
並進は通常の畳み込み、回転（正規化角）は単位円上のベクトル平均で平滑化する
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.ndimage import convolve1d

from ..geometry.pose import PoseEstimate
from ..geometry.rotations import canonicalize_euler_norm
from ..interfaces.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 2.0
TRUNCATE = 3.0


@dataclass
class PoseTrack:
    """一定フレームレートの姿勢推定値列"""

    rotations: np.ndarray       # (T, 3) 正規化角
    translations: np.ndarray    # (T, 3) メートル
    fps: float = 30.0
    frames: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=float).reshape(-1, 3)
        self.translations = np.asarray(self.translations, dtype=float).reshape(-1, 3)
        if len(self.rotations) < 1 or len(self.rotations) != len(self.translations):
            raise ConfigurationError(
                f"トラックの長さが不正です: 回転 {len(self.rotations)}, 並進 {len(self.translations)}")
        if self.frames is None:
            self.frames = np.arange(len(self.rotations))
        self.frames = np.asarray(self.frames, dtype=int)
        if len(self.frames) > 1 and np.any(np.diff(self.frames) != 1):
            raise ConfigurationError("トラックのフレーム番号は連続している必要があります")

    def __len__(self) -> int:
        return len(self.rotations)

    @classmethod
    def from_estimates(cls, estimates: List[PoseEstimate], fps: float = 30.0) -> "PoseTrack":
        return cls(np.array([e.r for e in estimates]), np.array([e.t for e in estimates]), fps)

    def to_estimates(self) -> List[PoseEstimate]:
        return [PoseEstimate(r, t) for r, t in zip(self.rotations, self.translations)]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, fps: float = 30.0) -> "PoseTrack":
        ordered = frame.sort_values('frame')
        return cls(ordered[['rx', 'ry', 'rz']].to_numpy(), ordered[['tx', 'ty', 'tz']].to_numpy(),
                   fps, ordered['frame'].to_numpy())

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(np.hstack([self.rotations, self.translations]),
                             columns=['rx', 'ry', 'rz', 'tx', 'ty', 'tz'])
        frame.insert(0, 'frame', self.frames)
        return frame


def gaussian_kernel(sigma: float, truncate: float = TRUNCATE) -> np.ndarray:
    """3σ で打ち切った正規化ガウスカーネル"""
    if not sigma > 0:
        raise ConfigurationError(f"sigma は正である必要があります: {sigma}")
    radius = int(truncate * sigma + 0.5)
    offsets = np.arange(-radius, radius + 1, dtype=float)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def smooth_series(values: np.ndarray, sigma: float) -> np.ndarray:
    """
    列方向（時間軸 axis=0）のガウス平滑化

    端では範囲外の重みを捨て、残った重みの和で割り直す
    """
    kernel = gaussian_kernel(sigma)
    values = np.asarray(values, dtype=float)
    weighted = convolve1d(values, kernel, axis=0, mode='constant', cval=0.0)
    mass = convolve1d(np.ones(values.shape[0]), kernel, mode='constant', cval=0.0)
    return weighted / mass.reshape((-1,) + (1,) * (values.ndim - 1))


def circular_smooth(rotations: np.ndarray, sigma: float) -> np.ndarray:
    """
    正規化角を単位円上の点として平滑化し、平均ベクトルの角度に戻す

    結果は [0, 1] の範囲で入力に最も近い代表値を取る（一定値 1.0 は 1.0 のまま）
    """
    rotations = np.asarray(rotations, dtype=float)
    angles = 2.0 * np.pi * rotations
    mean_cos = smooth_series(np.cos(angles), sigma)
    mean_sin = smooth_series(np.sin(angles), sigma)
    wrapped = canonicalize_euler_norm(np.arctan2(mean_sin, mean_cos) / (2.0 * np.pi))
    nearest = wrapped + np.round(rotations - wrapped)
    return np.where((nearest >= 0.0) & (nearest <= 1.0), nearest, wrapped)


def gaussian_smooth_track(track: PoseTrack, sigma: float = DEFAULT_SIGMA) -> PoseTrack:
    """
    姿勢トラックを平滑化

    Args:
        track: 入力トラック
        sigma: カーネル幅（フレーム数）

    Returns:
        同じ長さの平滑化済みトラック
    """
    if not sigma > 0:
        raise ConfigurationError(f"sigma は正である必要があります: {sigma}")
    return PoseTrack(
        rotations=circular_smooth(track.rotations, sigma),
        translations=smooth_series(track.translations, sigma),
        fps=track.fps,
        frames=track.frames.copy(),
    )
