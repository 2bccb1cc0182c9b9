"""
学習サービスの実装
Adam + コサインアニーリングでエンコーダとデコーダを同時に学習し、
エポックごとに検証・ログ記録・チェックポイント保存を行う
"""
import json
import logging
import math
import os
import shutil
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from ..data.data_provider import DroneDataProvider
from ..data.torch_dataset import DronePoseDataset, PhotometricJitter
from ..interfaces.exceptions import ConfigurationError, TrainingDivergedError
from ..models.checkpoint import save_checkpoint
from ..models.dronekey_model import DroneKeyModel, ModelOutput
from ..models.losses import (
    LossBreakdown,
    WeightingStrategy,
    combine_losses,
    loss_2d,
    loss_3d,
    loss_cls,
    loss_rot_circular,
    loss_trans,
)
from ..models.model_config import ModelConfig
from ..models.pose_estimators import DroneKeyEstimator
from .evaluation_service import PoseEvaluator

logger = logging.getLogger(__name__)

LOG_NAME = 'train_log.jsonl'
CHECKPOINT_DIR = 'checkpoints'
BEST_CHECKPOINT = 'best.pt'
LOSS_KEYS = ('l_2d', 'l_cls', 'l_3d', 'l_rot', 'l_trans', 'l_enc', 'l_dec', 'l_total')


@dataclass
class TrainConfig:
    """学習設定"""

    learning_rate: float = 1e-5
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    loss_strategy: str = 'equal'
    use_encoder: bool = True
    decoder_variant: int = 4
    class_input: str = 'soft'
    use_positional_encoding: bool = True
    # L_2D をピクセル座標ではなく解像度で正規化した座標で計算する
    normalize_keypoint_loss: bool = True
    validation_split: str = 'valid'
    # データ拡張は既定で使わない
    augmentation: bool = False
    eta_min_ratio: float = 1e-3
    device: str = 'cpu'

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"学習率は正である必要があります: {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"バッチサイズは1以上である必要があります: {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"エポック数は1以上である必要があります: {self.epochs}")
        WeightingStrategy(self.loss_strategy)

    def model_config(self, resolution: Tuple[int, int]) -> ModelConfig:
        return ModelConfig(
            resolution=tuple(resolution),
            use_encoder=self.use_encoder,
            decoder_variant=self.decoder_variant,
            class_input=self.class_input,
            use_positional_encoding=self.use_positional_encoding,
        )


@dataclass
class TrainingResult:
    records: List[Dict[str, Any]]
    best_record: Dict[str, Any]
    best_checkpoint: str
    log_path: str
    model: Optional[DroneKeyModel] = field(default=None, repr=False)


def select_checkpoint(records: List[Dict[str, Any]]) -> Dict[str, Any]:
    """検証回転 MAE 最小、同値なら並進 MAE、さらに同値なら早いエポックを選ぶ"""
    if not records:
        raise ConfigurationError("評価済みのチェックポイントがありません")
    return min(records, key=lambda r: (r['val_rot_mae_deg'], r['val_trans_mae_m'], r['epoch']))


def compute_losses(model: DroneKeyModel, batch: Dict[str, torch.Tensor],
                   normalize_keypoints: bool = True) -> Tuple[LossBreakdown, ModelOutput]:
    """1バッチの順伝播と5つの損失項"""
    output = model(batch['k_inv'], images=batch['image'],
                   keypoints_2d=batch['keypoints_2d'], class_ids=batch['class_id'])
    zero = output.decoder.r_pred.new_zeros(())
    if model.encoder is not None:
        pred_2d, gt_2d = output.y2d, batch['keypoints_2d']
        if normalize_keypoints:
            scale = pred_2d.new_tensor([float(model.config.resolution[0]), float(model.config.resolution[1])])
            pred_2d, gt_2d = pred_2d / scale, gt_2d / scale
        l_2d = loss_2d(pred_2d, gt_2d)
        l_cls = loss_cls(output.class_dist, batch['class_id'])
    else:
        l_2d, l_cls = zero, zero
    y3d = output.decoder.y3d
    breakdown = LossBreakdown(
        l_2d=l_2d,
        l_cls=l_cls,
        l_3d=loss_3d(y3d, batch['keypoints_3d']) if y3d is not None else zero,
        l_rot=loss_rot_circular(output.decoder.r_pred, batch['euler_norm']),
        l_trans=loss_trans(output.decoder.t_pred, batch['translation']),
    )
    return breakdown, output


class Trainer:
    """エンドツーエンド学習（Single Responsibility Principle）"""

    def __init__(self, config: TrainConfig, data_provider: DroneDataProvider, out_dir: str,
                 show_progress: bool = True):
        self.config = config
        self.data_provider = data_provider
        self.out_dir = out_dir
        self.show_progress = show_progress
        self.strategy = WeightingStrategy(config.loss_strategy)
        self.log_path = os.path.join(out_dir, LOG_NAME)
        self.checkpoint_dir = os.path.join(out_dir, CHECKPOINT_DIR)

    def _build_model(self) -> DroneKeyModel:
        manifest = self.data_provider.load_manifest()
        torch.manual_seed(self.config.seed)
        return DroneKeyModel(self.config.model_config(manifest.resolution)).to(self.config.device)

    def _train_loader(self) -> DataLoader:
        transform = PhotometricJitter(self.config.seed) if self.config.augmentation else None
        dataset = DronePoseDataset(self.data_provider, split='train', transform=transform)
        if len(dataset) == 0:
            raise ConfigurationError("学習用の分割 'train' にサンプルがありません")
        generator = torch.Generator().manual_seed(self.config.seed)
        return DataLoader(dataset, batch_size=self.config.batch_size, shuffle=True, generator=generator)

    def _validation_split(self) -> str:
        split = self.config.validation_split
        if not self.data_provider.get_split_indices(split):
            logger.warning("検証用の分割 '%s' が空のため 'train' で検証します", split)
            return 'train'
        return split

    def _write_record(self, record: Dict[str, Any]):
        with open(self.log_path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(record, sort_keys=True) + '\n')

    def train(self) -> TrainingResult:
        """
        学習を実行

        Returns:
            エポックごとの記録と最良チェックポイント
        """
        config = self.config
        loader = self._train_loader()
        validation_split = self._validation_split()
        model = self._build_model()
        optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
            optimizer, T_max=max(config.epochs - 1, 1), eta_min=config.learning_rate * config.eta_min_ratio)
        evaluator = PoseEvaluator(self.data_provider, show_progress=False)

        os.makedirs(self.checkpoint_dir, exist_ok=True)
        if os.path.exists(self.log_path):
            os.remove(self.log_path)
        logger.info("学習を開始します: %d サンプル, %d エポック, 損失重み付け %s",
                    len(loader.dataset), config.epochs, config.loss_strategy)

        records = []
        for epoch_index in range(config.epochs):
            epoch = epoch_index + 1
            lr = optimizer.param_groups[0]['lr']
            model.train()
            totals = {key: 0.0 for key in LOSS_KEYS}
            correct, seen = 0, 0
            progress = tqdm(loader, desc=f"epoch {epoch}/{config.epochs}", leave=False,
                            disable=not self.show_progress)
            for step, batch in enumerate(progress):
                batch = {k: v.to(config.device) for k, v in batch.items()}
                breakdown, output = compute_losses(model, batch, config.normalize_keypoint_loss)
                loss = combine_losses(breakdown, self.strategy, epoch_index, config.epochs)
                values = breakdown.as_floats(loss)
                if not math.isfinite(values['l_total']):
                    record = {'epoch': epoch, 'step': step, 'lr': lr, 'diverged': True, **values}
                    self._write_record(record)
                    raise TrainingDivergedError(f"エポック {epoch} のステップ {step} で損失が発散しました", record)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

                size = batch['class_id'].shape[0]
                for key in LOSS_KEYS:
                    totals[key] += values[key] * size
                if model.encoder is not None:
                    correct += int((output.class_dist.argmax(dim=-1) == batch['class_id']).sum())
                seen += size
                progress.set_postfix(loss=f"{values['l_total']:.4f}")
            scheduler.step()

            report = evaluator.evaluate(DroneKeyEstimator(model), validation_split)
            overall = report.overall
            record = {
                'epoch': epoch,
                'lr': lr,
                **{key: totals[key] / seen for key in LOSS_KEYS},
                'train_class_accuracy': correct / seen if model.encoder is not None else None,
                'val_split': validation_split,
                'val_rot_mae_deg': overall['rot_mae_deg'],
                'val_rot_medae_deg': overall['rot_medae_deg'],
                'val_trans_mae_m': overall['trans_mae_m'],
                'val_trans_medae_m': overall['trans_medae_m'],
                'val_class_accuracy': overall.get('class_accuracy'),
            }
            record['checkpoint'] = save_checkpoint(
                os.path.join(self.checkpoint_dir, f"epoch_{epoch:03d}.pt"), model, epoch,
                metrics={'val_rot_mae_deg': record['val_rot_mae_deg'],
                         'val_trans_mae_m': record['val_trans_mae_m']},
            )
            self._write_record(record)
            records.append(record)
            logger.info("epoch %d: L_total %.5f, 検証回転 MAE %.3f°, 検証並進 MAE %.4f m",
                        epoch, record['l_total'], record['val_rot_mae_deg'], record['val_trans_mae_m'])

        best = select_checkpoint(records)
        best_path = os.path.join(self.checkpoint_dir, BEST_CHECKPOINT)
        shutil.copyfile(best['checkpoint'], best_path)
        logger.info("最良チェックポイント: epoch %d → %s", best['epoch'], best_path)
        return TrainingResult(records=records, best_record=best, best_checkpoint=best_path,
                              log_path=self.log_path, model=model)


def train(config: TrainConfig, data_provider: DroneDataProvider, out_dir: str,
          show_progress: bool = True) -> TrainingResult:
    return Trainer(config, data_provider, out_dir, show_progress=show_progress).train()


def read_training_log(path: str) -> List[Dict[str, Any]]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]
