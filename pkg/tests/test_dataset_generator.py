"""
合成データセット生成のテスト
"""
import filecmp
import os
import sys
import unittest
from unittest import mock

import numpy as np

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data.dataset_generator import (  # noqa: E402
    DatasetManifest,
    build_manifest,
    desk_preset,
    frame_paths,
    generate_dataset,
    overfit_preset,
    split_for_scene,
    table2_preset,
)
from src.data.drone_classes import NUM_CLASSES, default_class_specs, get_class_spec  # noqa: E402
from src.data.trajectory import SceneConfig, frame_count, synth_trajectory  # noqa: E402
from src.geometry.camera import CameraIntrinsics  # noqa: E402
from src.interfaces.exceptions import ConfigurationError, DatasetExistsError, DatasetLoadError  # noqa: E402
from tests.fixtures import micro_config, micro_dataset, scratch_dir  # noqa: E402


class TestManifestPlanning(unittest.TestCase):
    """マニフェスト計画のテストクラス"""

    def test_table2_frame_count(self):
        """全規模構成のフレーム数・シーケンス数のテスト"""
        manifest = build_manifest(table2_preset())
        self.assertEqual(manifest.total_frames, 52920)
        self.assertEqual(manifest.sequence_count, 91)
        self.assertEqual(manifest.resolution, (1920, 1080))

    def test_table2_split_partition(self):
        """シーン単位の分割が全フレームを重複なく覆うテスト"""
        manifest = build_manifest(table2_preset())
        frames = manifest.frames_per_split()
        self.assertEqual(sum(frames.values()), manifest.total_frames)
        for record in manifest.sequences:
            self.assertEqual(record.split, split_for_scene(record.scene_id))
        scenes = {tag: {r.scene_id for r in manifest.sequences if r.split == tag} for tag in frames}
        self.assertEqual(scenes['valid'], {'03', '09', '13'})
        self.assertEqual(scenes['test'], {'06', '07'})
        self.assertFalse(scenes['train'] & (scenes['valid'] | scenes['test']))

    def test_presets(self):
        """机上規模・過学習用プリセットのフレーム数テスト"""
        desk = build_manifest(desk_preset())
        self.assertEqual(desk.total_frames, 120)
        self.assertEqual(desk.frames_per_split(), {'train': 40, 'valid': 40, 'test': 40})
        self.assertEqual(build_manifest(overfit_preset()).total_frames, 200)

    def test_non_integer_frame_count(self):
        """duration·fps が整数でない場合のテスト"""
        with self.assertRaises(ConfigurationError):
            frame_count(1.05, 10.0)
        self.assertEqual(frame_count(4.0, 30.0), 120)

    def test_backgrounds_shared_across_classes(self):
        """同じシーンの背景がクラス間で共有されるテスト"""
        manifest = build_manifest(desk_preset())
        by_scene = {}
        for record in manifest.sequences:
            by_scene.setdefault(record.scene_id, set()).add(record.background_seed)
        self.assertTrue(all(len(seeds) == 1 for seeds in by_scene.values()))


class TestClassSpecs(unittest.TestCase):
    """ドローンクラス定義のテストクラス"""

    def test_extent_monotonic(self):
        """body_extent が class_id 順に狭義単調増加するテスト"""
        extents = [spec.body_extent for spec in default_class_specs()]
        self.assertEqual(len(extents), NUM_CLASSES)
        self.assertTrue(np.all(np.diff(extents) > 0))

    def test_layout_centered(self):
        """プロペラ配置の重心が機体原点にあるテスト"""
        for class_id in range(NUM_CLASSES):
            layout = get_class_spec(class_id).propeller_layout
            np.testing.assert_allclose(layout.mean(axis=0), 0.0, atol=1e-12)

    def test_unknown_class(self):
        """存在しないクラスIDのテスト"""
        with self.assertRaises(ConfigurationError):
            get_class_spec(NUM_CLASSES)


class TestTrajectory(unittest.TestCase):
    """飛行軌跡生成のテストクラス"""

    def setUp(self):
        self.camera = CameraIntrinsics.from_field_of_view(128, 128)

    def _config(self, motion_kind: str, seed: int = 3) -> SceneConfig:
        return SceneConfig(scene_id='01', motion_kind=motion_kind, duration=3.0, fps=10.0,
                           backgrounds=[1], camera=self.camera, rng_seed=seed)

    def test_deterministic(self):
        """同じシードで同じ軌跡になるテスト"""
        for kind in ('linear', 'non-linear'):
            first = synth_trajectory(self._config(kind))
            second = synth_trajectory(self._config(kind))
            self.assertEqual(len(first), 30)
            for a, b in zip(first, second):
                np.testing.assert_array_equal(a.rotation, b.rotation)
                np.testing.assert_array_equal(a.translation, b.translation)

    def test_depth_in_range(self):
        """機体が奥行き範囲内に留まるテスト"""
        for kind in ('linear', 'non-linear'):
            for seed in range(5):
                for pose in synth_trajectory(self._config(kind, seed)):
                    self.assertGreaterEqual(pose.translation[2], 0.8)
                    self.assertLessEqual(pose.translation[2], 2.0)

    def test_unknown_motion(self):
        """未知の運動種別のテスト"""
        with self.assertRaises(ConfigurationError):
            self._config('spiral')


class TestDatasetGeneration(unittest.TestCase):
    """データセット書き出しのテストクラス"""

    def setUp(self):
        self.root = micro_dataset()

    def test_files_written(self):
        """全フレームの画像とアノテーションが書き出されるテスト"""
        manifest = DatasetManifest.load(self.root)
        self.assertEqual(manifest.total_frames, 24)
        for record in manifest.sequences:
            for frame_index in range(record.frames):
                image_path, annotation_path = frame_paths(self.root, record, frame_index)
                self.assertTrue(os.path.isfile(image_path))
                self.assertTrue(os.path.isfile(annotation_path))

    def test_regeneration_is_bit_identical(self):
        """同じシードの再生成がバイト単位で一致するテスト"""
        other = os.path.join(scratch_dir('regen'), 'dataset')
        generate_dataset(micro_config(), other)
        manifest = DatasetManifest.load(self.root)
        self.assertTrue(filecmp.cmp(os.path.join(self.root, 'manifest.json'),
                                    os.path.join(other, 'manifest.json'), shallow=False))
        for record in manifest.sequences:
            for frame_index in range(record.frames):
                for a, b in zip(frame_paths(self.root, record, frame_index),
                                frame_paths(other, record, frame_index)):
                    self.assertTrue(filecmp.cmp(a, b, shallow=False), a)

    def test_parallel_generation_matches_serial(self):
        """並列生成が直列生成と一致するテスト"""
        other = os.path.join(scratch_dir('parallel'), 'dataset')
        generate_dataset(micro_config(), other, workers=2)
        manifest = DatasetManifest.load(self.root)
        record = manifest.sequences[-1]
        a, _ = frame_paths(self.root, record, 2)
        b, _ = frame_paths(other, record, 2)
        self.assertTrue(filecmp.cmp(a, b, shallow=False))

    def test_existing_directory_rejected(self):
        """既存ディレクトリへの生成が拒否されるテスト"""
        with self.assertRaises(DatasetExistsError):
            generate_dataset(micro_config(), self.root)

    def test_overwrite(self):
        """--overwrite 相当で置き換えられるテスト"""
        target = os.path.join(scratch_dir('overwrite'), 'dataset')
        generate_dataset(micro_config(seed=1), target)
        manifest = generate_dataset(micro_config(seed=2), target, overwrite=True)
        self.assertEqual(DatasetManifest.load(target).seed, manifest.seed)

    def test_failed_generation_leaves_nothing(self):
        """途中で失敗した場合に出力ディレクトリも作業領域も残らないテスト"""
        parent = scratch_dir('failed')
        target = os.path.join(parent, 'dataset')
        with mock.patch('src.data.dataset_generator._render_subsequence',
                        side_effect=RuntimeError('render failed')):
            with self.assertRaises(RuntimeError):
                generate_dataset(micro_config(), target)
        self.assertFalse(os.path.exists(target))
        self.assertEqual(os.listdir(parent), [])
        manifest = generate_dataset(micro_config(), target)
        self.assertEqual(DatasetManifest.load(target).total_frames, manifest.total_frames)

    def test_failed_overwrite_keeps_previous(self):
        """上書き生成が失敗しても既存のデータセットが残るテスト"""
        parent = scratch_dir('failed-overwrite')
        target = os.path.join(parent, 'dataset')
        generate_dataset(micro_config(seed=1), target)
        with mock.patch('src.data.dataset_generator._render_subsequence',
                        side_effect=RuntimeError('render failed')):
            with self.assertRaises(RuntimeError):
                generate_dataset(micro_config(seed=2), target, overwrite=True)
        self.assertEqual(DatasetManifest.load(target).seed, 1)
        self.assertEqual(os.listdir(parent), ['dataset'])

    def test_missing_manifest(self):
        """マニフェストが無い場合のテスト"""
        with self.assertRaises(DatasetLoadError):
            DatasetManifest.load(scratch_dir('empty'))


if __name__ == '__main__':
    unittest.main()
