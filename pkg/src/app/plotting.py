"""
静的な図の出力（3D 軌跡、特徴分布の散布図）
"""
import logging
import os
from typing import Dict, List, Optional

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from ..analysis.smoothing import PoseTrack  # noqa: E402

logger = logging.getLogger(__name__)


def plot_trajectory(tracks: Dict[str, PoseTrack], path: str, title: Optional[str] = None) -> str:
    """
    カメラ座標系の並進を3D軌跡として描画

    Args:
        tracks: 凡例名 → トラック（予測・平滑化後・正解などを重ねられる）
        path: 出力画像パス
    """
    figure = plt.figure(figsize=(6, 5))
    axes = figure.add_subplot(projection='3d')
    palette = sns.color_palette('deep', n_colors=max(len(tracks), 1))
    for color, (name, track) in zip(palette, tracks.items()):
        t = track.translations
        axes.plot(t[:, 0], t[:, 2], t[:, 1], label=name, color=color, linewidth=1.2)
        axes.scatter(t[:1, 0], t[:1, 2], t[:1, 1], color=color, s=12)
    axes.set_xlabel('x [m]')
    axes.set_ylabel('z (depth) [m]')
    axes.set_zlabel('y [m]')
    axes.invert_zaxis()
    if title:
        axes.set_title(title)
    axes.legend(loc='upper right', fontsize=8)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    logger.debug("軌跡を描画しました: %s", path)
    return path


def plot_feature_scatter(projection: pd.DataFrame, path: str,
                         explained_variance: Optional[List[float]] = None) -> str:
    """PCA 射影（列 pc1, pc2, label）の散布図"""
    figure, axes = plt.subplots(figsize=(6, 5))
    sns.scatterplot(data=projection, x='pc1', y='pc2', hue='label', s=18, alpha=0.8, ax=axes)
    if explained_variance is not None:
        axes.set_xlabel(f"PC1 ({explained_variance[0] * 100:.1f}%)")
        axes.set_ylabel(f"PC2 ({explained_variance[1] * 100:.1f}%)")
    axes.set_title('Feature distribution (PCA)')
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    return path
