"""
特徴分布分析のテスト
"""
import os
import sys
import unittest

import numpy as np

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.analysis.feature_analysis import (  # noqa: E402
    FEATURE_DIM,
    FeatureCloud,
    extract_image_features,
    image_descriptor,
    pca_project,
    standardize_features,
)
from src.data.data_provider import DroneDataProvider  # noqa: E402
from src.interfaces.exceptions import ConfigurationError, DegeneracyError  # noqa: E402
from tests.fixtures import micro_dataset  # noqa: E402


class TestStandardization(unittest.TestCase):
    """標準化のテストクラス"""

    def test_zero_mean_unit_variance(self):
        """標準化後に平均0・分散1になるテスト"""
        rng = np.random.default_rng(0)
        features = rng.normal(loc=5.0, scale=[1.0, 10.0, 0.1], size=(50, 3))
        standardized, kept = standardize_features(features)
        np.testing.assert_allclose(standardized.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(standardized.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_array_equal(kept, [0, 1, 2])

    def test_zero_variance_dims_dropped(self):
        """分散0の次元が警告付きで取り除かれるテスト"""
        features = np.c_[np.arange(5.0), np.full(5, 3.0), np.arange(5.0) ** 2]
        with self.assertLogs('src.analysis.feature_analysis', level='WARNING'):
            standardized, kept = standardize_features(features)
        np.testing.assert_array_equal(kept, [0, 2])
        self.assertEqual(standardized.shape, (5, 2))

    def test_identical_vectors(self):
        """全て同一の特徴ベクトルの場合のテスト"""
        with self.assertRaises(DegeneracyError):
            standardize_features(np.ones((4, 6)))


class TestPCAProjection(unittest.TestCase):
    """PCA 射影のテストクラス"""

    def test_line_explains_all_variance(self):
        """5次元の直線上の点が第1主成分で分散を全て説明するテスト"""
        t = np.linspace(-1.0, 2.0, 25)[:, None]
        features = np.array([1.0, 2.0, 3.0, 4.0, 5.0]) + t * np.array([0.5, -1.0, 2.0, 0.1, 3.0])
        projection = pca_project(FeatureCloud(features, ['line'] * 25))
        self.assertAlmostEqual(projection.explained_variance[0], 1.0, delta=1e-9)
        self.assertAlmostEqual(projection.explained_variance[1], 0.0, delta=1e-9)
        self.assertEqual(projection.points.shape, (25, 2))

    def test_deterministic_signs(self):
        """主成分の符号が入力の並び順に依存しないテスト"""
        rng = np.random.default_rng(2)
        features = rng.normal(size=(30, 4)) * [3.0, 2.0, 1.0, 0.5]
        first = pca_project(FeatureCloud(features, ['a'] * 30))
        second = pca_project(FeatureCloud(features[::-1], ['a'] * 30))
        np.testing.assert_allclose(first.components, second.components, atol=1e-9)
        np.testing.assert_allclose(first.points[::-1], second.points, atol=1e-9)

    def test_too_few_vectors(self):
        """特徴ベクトルが3個未満の場合のテスト"""
        with self.assertRaises(ConfigurationError):
            pca_project(FeatureCloud(np.eye(2), ['a', 'b']))
        with self.assertRaises(ConfigurationError):
            FeatureCloud(np.ones((3, 2)), ['a', 'b'])


class TestImageDescriptor(unittest.TestCase):
    """画像記述子のテストクラス"""

    def test_dimension_and_normalization(self):
        """記述子の次元と色ヒストグラムの正規化テスト"""
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(16, 24, 3), dtype=np.uint8)
        descriptor = image_descriptor(image)
        self.assertEqual(descriptor.shape, (FEATURE_DIM,))
        self.assertEqual(FEATURE_DIM, 32)
        for channel in range(3):
            self.assertAlmostEqual(float(descriptor[8 * channel:8 * (channel + 1)].sum()), 1.0, places=12)

    def test_flat_image_has_no_gradient(self):
        """一様な画像の勾配ヒストグラムが0になるテスト"""
        descriptor = image_descriptor(np.full((10, 10, 3), 128, dtype=np.uint8))
        np.testing.assert_allclose(descriptor[24:], 0.0)

    def test_invalid_image(self):
        """不正な画像形状のテスト"""
        with self.assertRaises(ConfigurationError):
            image_descriptor(np.zeros((10, 10)))

    def test_dataset_features(self):
        """データセットの画像から特徴群を作成して射影するテスト"""
        data_provider = DroneDataProvider(micro_dataset(), cache_images=True)
        images = [data_provider.load_image(i) for i in range(len(data_provider))]
        first = extract_image_features(images[:12], label='first')
        second = extract_image_features(images[12:], label='second')
        cloud = FeatureCloud.concat([first, second])
        self.assertEqual(len(cloud), 24)
        self.assertEqual(cloud.labels.count('second'), 12)
        projection = pca_project(cloud)
        self.assertEqual(projection.points.shape, (24, 2))
        self.assertLessEqual(sum(projection.explained_variance), 1.0 + 1e-9)
        with self.assertRaises(ConfigurationError):
            extract_image_features([])


if __name__ == '__main__':
    unittest.main()
