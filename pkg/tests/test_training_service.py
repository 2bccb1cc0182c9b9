"""
学習サービスのテスト
"""
import json
import os
import sys
import unittest

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data.data_provider import DroneDataProvider  # noqa: E402
from src.data.dataset_generator import generate_dataset, overfit_preset  # noqa: E402
from src.interfaces.exceptions import ConfigurationError, TrainingDivergedError  # noqa: E402
from src.models.checkpoint import load_checkpoint  # noqa: E402
from src.models.pose_estimators import DroneKeyEstimator  # noqa: E402
from src.services.evaluation_service import PoseEvaluator  # noqa: E402
from src.services.training_service import (  # noqa: E402
    LOSS_KEYS,
    TrainConfig,
    read_training_log,
    select_checkpoint,
    train,
)
from tests.fixtures import micro_dataset, scratch_dir, slow_tests_enabled  # noqa: E402


class TestSelectCheckpoint(unittest.TestCase):
    """チェックポイント選択のテストクラス"""

    def test_tie_breaking(self):
        """回転 MAE → 並進 MAE → エポックの順で選ぶテスト"""
        records = [
            {'epoch': 1, 'val_rot_mae_deg': 5.0, 'val_trans_mae_m': 0.2},
            {'epoch': 2, 'val_rot_mae_deg': 4.0, 'val_trans_mae_m': 0.3},
            {'epoch': 3, 'val_rot_mae_deg': 4.0, 'val_trans_mae_m': 0.1},
            {'epoch': 4, 'val_rot_mae_deg': 4.0, 'val_trans_mae_m': 0.1},
        ]
        self.assertEqual(select_checkpoint(records)['epoch'], 3)

    def test_empty(self):
        """記録が無い場合のテスト"""
        with self.assertRaises(ConfigurationError):
            select_checkpoint([])


class TestTrainConfig(unittest.TestCase):
    """TrainConfigのテストクラス"""

    def test_invalid_values(self):
        """不正な学習設定のテスト"""
        with self.assertRaises(ConfigurationError):
            TrainConfig(learning_rate=0.0)
        with self.assertRaises(ConfigurationError):
            TrainConfig(epochs=0)
        with self.assertRaises(ConfigurationError):
            TrainConfig(loss_strategy='random')

    def test_model_config(self):
        """学習設定からモデル構成を作るテスト"""
        model_config = TrainConfig(decoder_variant=2, use_encoder=False).model_config((64, 64))
        self.assertEqual(model_config.resolution, (64, 64))
        self.assertEqual(model_config.decoder_variant, 2)
        self.assertFalse(model_config.use_encoder)


class TestTrainer(unittest.TestCase):
    """Trainerのテストクラス"""

    def setUp(self):
        """テスト前の準備"""
        self.data_provider = DroneDataProvider(micro_dataset(), cache_images=True)

    def _train(self, **overrides):
        values = dict(epochs=2, batch_size=4, learning_rate=1e-4, seed=7)
        values.update(overrides)
        return train(TrainConfig(**values), self.data_provider, scratch_dir('train'), show_progress=False)

    def test_training_log_and_checkpoint(self):
        """エポックごとの記録・ログ・最良チェックポイントのテスト"""
        result = self._train()
        self.assertEqual([r['epoch'] for r in result.records], [1, 2])
        logged = read_training_log(result.log_path)
        self.assertEqual(len(logged), 2)
        for record in logged:
            for key in LOSS_KEYS + ('lr', 'val_rot_mae_deg', 'val_trans_mae_m', 'train_class_accuracy'):
                self.assertIn(key, record)
            self.assertAlmostEqual(record['l_enc'], record['l_2d'] + record['l_cls'], places=6)
            self.assertAlmostEqual(record['l_dec'], record['l_3d'] + record['l_rot'] + record['l_trans'], places=6)
        self.assertTrue(os.path.isfile(result.best_checkpoint))
        model, payload = load_checkpoint(result.best_checkpoint, expected_resolution=(128, 128))
        self.assertEqual(payload['epoch'], result.best_record['epoch'])
        self.assertIsNotNone(model.encoder)

    def test_deterministic(self):
        """同じシードで同じ損失になるテスト"""
        first = self._train(epochs=1)
        second = self._train(epochs=1)
        self.assertEqual(first.records[0]['l_total'], second.records[0]['l_total'])
        self.assertEqual(first.records[0]['val_rot_mae_deg'], second.records[0]['val_rot_mae_deg'])

    def test_cosine_schedule(self):
        """コサインアニーリングで学習率が下がるテスト"""
        result = self._train(epochs=3, learning_rate=1e-3)
        rates = [r['lr'] for r in result.records]
        self.assertAlmostEqual(rates[0], 1e-3, places=12)
        self.assertAlmostEqual(rates[1], (1e-3 + 1e-6) / 2, places=9)
        self.assertAlmostEqual(rates[2], 1e-6, places=12)

    def test_decoder_variants(self):
        """全デコーダ構成で学習・評価が通るテスト"""
        for variant in (1, 2, 3, 4):
            result = self._train(epochs=1, decoder_variant=variant)
            record = result.records[0]
            if variant < 3:
                self.assertEqual(record['l_3d'], 0.0)
            else:
                self.assertGreater(record['l_3d'], 0.0)

    def test_encoder_off(self):
        """エンコーダ無効時はエンコーダ損失が0になるテスト"""
        result = self._train(epochs=1, use_encoder=False, decoder_variant=3)
        record = result.records[0]
        self.assertEqual(record['l_2d'], 0.0)
        self.assertEqual(record['l_cls'], 0.0)
        self.assertIsNone(record['train_class_accuracy'])
        report = PoseEvaluator(self.data_provider, show_progress=False).evaluate(
            DroneKeyEstimator(result.model), 'test')
        self.assertEqual(report.overall['samples'], 8)

    def test_loss_strategies(self):
        """全ての損失重み付け戦略で学習が通るテスト"""
        for strategy in ('tanh-weighted', 'smoothly-shifted', '3d-biased'):
            result = self._train(epochs=2, loss_strategy=strategy)
            self.assertEqual(len(result.records), 2)

    def test_empty_validation_split(self):
        """検証用の分割が空の場合に train で検証するテスト"""
        with self.assertLogs('src.services.training_service', level='WARNING'):
            result = self._train(epochs=1, validation_split='holdout')
        self.assertEqual(result.records[0]['val_split'], 'train')

    def test_divergence(self):
        """損失が発散した場合に診断記録を残して停止するテスト"""
        out_dir = scratch_dir('diverge')
        config = TrainConfig(epochs=1, batch_size=4, learning_rate=float('inf'), seed=0)
        with self.assertRaises(TrainingDivergedError) as context:
            train(config, self.data_provider, out_dir, show_progress=False)
        self.assertTrue(context.exception.record['diverged'])
        with open(os.path.join(out_dir, 'train_log.jsonl'), 'r', encoding='utf-8') as f:
            last = json.loads(f.readlines()[-1])
        self.assertTrue(last['diverged'])


@unittest.skipUnless(slow_tests_enabled(), 'DRONEKEY_SLOW_TESTS=1 のときのみ実行')
class TestOverfit(unittest.TestCase):
    """200サンプルへの過学習のテストクラス"""

    def test_overfit_convergence(self):
        """200エポックで学習データの回転・並進・クラスが収束するテスト"""
        root = os.path.join(scratch_dir('overfit'), 'dataset')
        generate_dataset(overfit_preset(seed=0), root)
        data_provider = DroneDataProvider(root, cache_images=True)
        config = TrainConfig(epochs=200, batch_size=8, learning_rate=1e-3, seed=0, validation_split='train')
        result = train(config, data_provider, scratch_dir('overfit-run'), show_progress=False)
        report = PoseEvaluator(data_provider, show_progress=False).evaluate(
            DroneKeyEstimator(result.model), 'train')
        overall = report.overall
        self.assertLess(overall['rot_mae_deg'], 5.0)
        self.assertLess(overall['trans_mae_m'], 0.05)
        self.assertEqual(overall['class_accuracy'], 1.0)


if __name__ == '__main__':
    unittest.main()
