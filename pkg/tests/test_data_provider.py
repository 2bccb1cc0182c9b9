"""
データプロバイダーのテスト
"""
import os
import shutil
import sys
import unittest

import numpy as np
import torch

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data.annotations import Annotation  # noqa: E402
from src.data.data_provider import DATA_ENV_VAR, DroneDataProvider, default_data_dir  # noqa: E402
from src.data.dataset_generator import frame_paths  # noqa: E402
from src.data.torch_dataset import DronePoseDataset, PhotometricJitter, collate_samples  # noqa: E402
from src.geometry.camera import project_point  # noqa: E402
from src.geometry.rotations import euler_norm_to_matrix, relative_rotation_angle  # noqa: E402
from src.interfaces.exceptions import DatasetLoadError  # noqa: E402
from tests.fixtures import micro_dataset, scratch_dir  # noqa: E402


class TestDroneDataProvider(unittest.TestCase):
    """DroneDataProviderのテストクラス"""

    def setUp(self):
        """テスト前の準備"""
        self.data_provider = DroneDataProvider(micro_dataset())

    def test_load_manifest(self):
        """マニフェスト読み込みテスト"""
        manifest = self.data_provider.load_manifest()
        self.assertEqual(len(self.data_provider), 24)
        self.assertEqual(manifest.resolution, (128, 128))

    def test_split_indices_partition(self):
        """分割ごとのサンプル番号が全体を重複なく覆うテスト"""
        splits = [self.data_provider.get_split_indices(tag) for tag in ('train', 'valid', 'test')]
        self.assertEqual([len(s) for s in splits], [8, 8, 8])
        self.assertEqual(sorted(i for s in splits for i in s), list(range(24)))
        self.assertEqual(self.data_provider.get_split_indices('holdout'), [])

    def test_load_sample(self):
        """サンプル読み込みテスト"""
        sample = self.data_provider.load_sample(5)
        self.assertEqual(sample.image.shape, (128, 128, 3))
        self.assertEqual(sample.image.dtype, np.uint8)
        self.assertIsInstance(sample.annotation, Annotation)
        self.assertEqual(sample.index, 5)

    def test_annotation_consistency(self):
        """アノテーションの再投影・回転表現の整合性テスト"""
        for index in range(len(self.data_provider)):
            annotation = self.data_provider.load_annotation(index)
            projected = project_point(annotation.intrinsics, annotation.keypoints_3d)
            self.assertLessEqual(np.max(np.linalg.norm(projected - annotation.keypoints_2d, axis=-1)), 0.5)
            angle = relative_rotation_angle(euler_norm_to_matrix(annotation.euler_norm), annotation.pose.rotation)
            self.assertLess(float(angle), 1e-5)
            self.assertTrue(np.all((annotation.euler_norm >= 0) & (annotation.euler_norm < 1)))

    def test_sample_table(self):
        """サンプル対応表のテスト"""
        table = self.data_provider.get_sample_table('test')
        self.assertEqual(len(table), 8)
        self.assertEqual(set(table['scene_id']), {'06'})
        self.assertEqual(set(table['class_name']), {'Mini3', 'Tello'})
        self.assertIn('06/Tello/bg02', set(table['sequence']))

    def test_sequence_indices(self):
        """サブシーケンスごとのサンプル番号のテスト"""
        sequences = self.data_provider.get_sequence_indices()
        self.assertEqual(len(sequences), 6)
        self.assertTrue(all(len(indices) == 4 for indices in sequences.values()))

    def test_index_out_of_range(self):
        """範囲外のサンプル番号のテスト"""
        with self.assertRaises(IndexError):
            self.data_provider.load_sample(24)

    def test_default_data_dir(self):
        """環境変数によるデータセットのルート指定テスト"""
        previous = os.environ.get(DATA_ENV_VAR)
        os.environ[DATA_ENV_VAR] = '/tmp/somewhere'
        try:
            self.assertEqual(default_data_dir(), '/tmp/somewhere')
        finally:
            if previous is None:
                del os.environ[DATA_ENV_VAR]
            else:
                os.environ[DATA_ENV_VAR] = previous


class TestCorruptDataset(unittest.TestCase):
    """欠損・破損したデータセットのテストクラス"""

    def setUp(self):
        self.root = os.path.join(scratch_dir('corrupt'), 'dataset')
        shutil.copytree(micro_dataset(), self.root)
        self.data_provider = DroneDataProvider(self.root)
        self.record = self.data_provider.load_manifest().sequences[0]

    def test_missing_image(self):
        """画像ファイルが無い場合のテスト"""
        image_path, _ = frame_paths(self.root, self.record, 1)
        os.remove(image_path)
        with self.assertRaises(DatasetLoadError) as context:
            self.data_provider.load_image(1)
        self.assertEqual(context.exception.path, image_path)

    def test_corrupt_annotation(self):
        """アノテーションが壊れている場合のテスト"""
        _, annotation_path = frame_paths(self.root, self.record, 2)
        with open(annotation_path, 'w', encoding='utf-8') as f:
            f.write('{"keypoints_2d": [1, 2\n')
        with self.assertRaises(DatasetLoadError):
            self.data_provider.load_annotation(2)

    def test_corrupt_image(self):
        """画像が壊れている場合のテスト"""
        image_path, _ = frame_paths(self.root, self.record, 3)
        with open(image_path, 'wb') as f:
            f.write(b'not a png')
        with self.assertRaises(DatasetLoadError):
            self.data_provider.load_image(3)


class TestTorchDataset(unittest.TestCase):
    """PyTorch アダプタのテストクラス"""

    def setUp(self):
        self.data_provider = DroneDataProvider(micro_dataset())

    def test_item_tensors(self):
        """バッチ辞書の形状テスト"""
        dataset = DronePoseDataset(self.data_provider, split='train')
        self.assertEqual(len(dataset), 8)
        item = dataset[0]
        self.assertEqual(tuple(item['image'].shape), (3, 128, 128))
        self.assertLessEqual(float(item['image'].max()), 1.0)
        self.assertEqual(tuple(item['k_inv'].shape), (3, 3))
        self.assertEqual(tuple(item['keypoints_2d'].shape), (4, 2))
        self.assertEqual(tuple(item['keypoints_3d'].shape), (4, 3))
        self.assertEqual(item['class_id'].dtype, torch.long)

    def test_collate(self):
        """サンプル列のバッチ化テスト"""
        samples = [self.data_provider.load_sample(i) for i in range(3)]
        batch = collate_samples(samples)
        self.assertEqual(tuple(batch['image'].shape), (3, 3, 128, 128))
        self.assertEqual(batch['index'].tolist(), [0, 1, 2])

    def test_photometric_jitter_keeps_geometry(self):
        """明るさ変動でアノテーションが変わらないテスト"""
        sample = self.data_provider.load_sample(0)
        jittered = PhotometricJitter(seed=3)(sample)
        self.assertIs(jittered.annotation, sample.annotation)
        self.assertEqual(jittered.image.shape, sample.image.shape)
        self.assertEqual(jittered.image.dtype, np.uint8)


if __name__ == '__main__':
    unittest.main()
