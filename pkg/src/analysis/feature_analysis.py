"""
データセットの特徴分布分析
画像ごとの手作り記述子（色ヒストグラム + 勾配方向ヒストグラム）を標準化し、PCA で2次元に射影する
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import sobel
from sklearn.decomposition import PCA
from sklearn.preprocessing import StandardScaler

from ..interfaces.exceptions import ConfigurationError, DegeneracyError

logger = logging.getLogger(__name__)

COLOR_BINS = 8
ORIENTATION_BINS = 8
FEATURE_DIM = 3 * COLOR_BINS + ORIENTATION_BINS
VARIANCE_EPS = 1e-12


@dataclass
class FeatureCloud:
    """同じ次元の特徴ベクトル群と、それぞれのデータセットラベル"""

    features: np.ndarray
    labels: List[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ConfigurationError(f"特徴は (n, D) の2次元配列である必要があります: {self.features.shape}")
        if len(self.labels) != len(self.features):
            raise ConfigurationError(f"ラベル数が特徴数と一致しません: {len(self.labels)} != {len(self.features)}")
        if len(self.features) < 2:
            raise ConfigurationError("特徴ベクトルは2個以上必要です")

    def __len__(self) -> int:
        return len(self.features)

    @classmethod
    def concat(cls, clouds: Sequence["FeatureCloud"]) -> "FeatureCloud":
        return cls(np.vstack([c.features for c in clouds]), [label for c in clouds for label in c.labels])


@dataclass
class Projection:
    points: np.ndarray                  # (n, 2)
    explained_variance: Tuple[float, float]
    components: np.ndarray              # (2, D') 標準化空間での主成分
    kept_dims: np.ndarray


def standardize_features(features) -> Tuple[np.ndarray, np.ndarray]:
    """
    次元ごとに平均0・分散1へ標準化

    分散0の次元は警告を出して取り除く

    Returns:
        (標準化した特徴, 残した次元の番号)
    """
    features = np.asarray(features, dtype=float)
    variance = features.var(axis=0)
    kept = np.flatnonzero(variance > VARIANCE_EPS)
    if kept.size == 0:
        raise DegeneracyError("全ての特徴ベクトルが同一のため標準化できません")
    dropped = features.shape[1] - kept.size
    if dropped:
        logger.warning("分散0の次元を %d 個取り除きました", dropped)
    return StandardScaler().fit_transform(features[:, kept]), kept


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """各主成分の最初の非ゼロ成分が正になるよう符号を揃える"""
    fixed = components.copy()
    for row in fixed:
        nonzero = np.flatnonzero(np.abs(row) > 1e-12)
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    return fixed


def pca_project(cloud: FeatureCloud) -> Projection:
    """
    標準化した特徴を上位2主成分に射影

    Args:
        cloud: 特徴ベクトル群（3個以上）

    Returns:
        2次元座標と各主成分の寄与率
    """
    if len(cloud) < 3:
        raise ConfigurationError(f"PCA には3個以上の特徴ベクトルが必要です: {len(cloud)}")
    standardized, kept = standardize_features(cloud.features)
    n_components = min(2, standardized.shape[1])
    pca = PCA(n_components=n_components, svd_solver='full')
    pca.fit(standardized)
    components = _fix_signs(pca.components_)
    points = standardized @ components.T
    ratios = list(pca.explained_variance_ratio_)
    if n_components < 2:
        # 1次元しか残らない場合は第2成分を0で埋める
        points = np.hstack([points, np.zeros((len(points), 1))])
        components = np.vstack([components, np.zeros_like(components)])
        ratios.append(0.0)
    return Projection(points=points, explained_variance=(float(ratios[0]), float(ratios[1])),
                      components=components, kept_dims=kept)


def image_descriptor(image: np.ndarray) -> np.ndarray:
    """
    1枚の画像の記述子（次元 FEATURE_DIM = 32）

    先頭24次元はチャンネルごとの8ビン色ヒストグラム（画素数で正規化）、
    残り8次元は勾配強度で重み付けした勾配方向ヒストグラム（画素あたり）
    """
    pixels = np.asarray(image)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ConfigurationError(f"画像は (H, W, 3) である必要があります: {pixels.shape}")
    count = pixels.shape[0] * pixels.shape[1]
    color = [
        np.histogram(pixels[..., c], bins=COLOR_BINS, range=(0, 256))[0] / count
        for c in range(3)
    ]
    gray = pixels.astype(float).mean(axis=2) / 255.0
    gx = sobel(gray, axis=1, mode='nearest')
    gy = sobel(gray, axis=0, mode='nearest')
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    gradient = np.histogram(orientation, bins=ORIENTATION_BINS, range=(0.0, np.pi), weights=magnitude)[0] / count
    return np.concatenate(color + [gradient])


def extract_image_features(images: Sequence[np.ndarray], label: Optional[str] = None,
                           labels: Optional[List[str]] = None) -> FeatureCloud:
    """画像群から記述子を計算して FeatureCloud を作成"""
    if len(images) == 0:
        raise ConfigurationError("画像が1枚もありません")
    features = np.stack([image_descriptor(image) for image in images])
    if labels is None:
        labels = [label or 'dataset'] * len(images)
    return FeatureCloud(features, list(labels))
