"""
分析パッケージ（姿勢トラックの平滑化、特徴分布の PCA）
"""

from .feature_analysis import FeatureCloud, extract_image_features, pca_project, standardize_features
from .smoothing import PoseTrack, gaussian_smooth_track

__all__ = [
    'FeatureCloud',
    'PoseTrack',
    'extract_image_features',
    'gaussian_smooth_track',
    'pca_project',
    'standardize_features',
]
