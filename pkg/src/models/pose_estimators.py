"""
姿勢推定器の実装（提案モデルと キーポイント + PnP ベースライン）
Open/Closed Principleを実装
"""
import logging
from typing import List, Optional

import numpy as np
import torch

from ..data.annotations import Sample
from ..data.drone_classes import get_class_spec
from ..data.torch_dataset import collate_samples
from ..geometry.pose import PoseEstimate
from ..interfaces.exceptions import ConfigurationError, ConvergenceError
from ..interfaces.pose_interface import IPoseEstimator
from .dronekey_model import DroneKeyModel
from .pnp_solver import PnPProblem, pnp_solve

logger = logging.getLogger(__name__)

KEYPOINT_SOURCES = ('gt', 'encoder')


class DroneKeyEstimator(IPoseEstimator):
    """エンコーダ・デコーダによるエンドツーエンド推定"""

    name = 'DroneKey++'

    def __init__(self, model: DroneKeyModel, batch_size: int = 16):
        self.model = model
        self.batch_size = batch_size

    @torch.no_grad()
    def estimate(self, samples: List[Sample]) -> List[PoseEstimate]:
        self.model.eval()
        estimates = []
        for start in range(0, len(samples), self.batch_size):
            batch = collate_samples(samples[start:start + self.batch_size])
            device = next(self.model.parameters()).device
            batch = {k: v.to(device) for k, v in batch.items()}
            output = self.model(batch['k_inv'], images=batch['image'],
                                keypoints_2d=batch['keypoints_2d'], class_ids=batch['class_id'])
            class_ids = output.class_dist.argmax(dim=-1)
            for k in range(len(class_ids)):
                estimates.append(PoseEstimate(
                    r=output.decoder.r_pred[k].double().cpu().numpy(),
                    t=output.decoder.t_pred[k].double().cpu().numpy(),
                    class_id=int(class_ids[k]),
                    keypoints_2d=output.y2d[k].double().cpu().numpy(),
                ))
        return estimates


class PnPBaselineEstimator(IPoseEstimator):
    """
    2D キーポイント + PnP（機体寸法を事前情報として使う）

    source='gt' は正解キーポイント、source='encoder' は学習済みエンコーダの出力を使う。
    寸法の事前情報には常に正解クラスの配置を使う
    """

    def __init__(self, source: str = 'gt', model: Optional[DroneKeyModel] = None, batch_size: int = 16):
        if source not in KEYPOINT_SOURCES:
            raise ConfigurationError(f"サポートされていないキーポイントソース: {source} (候補: {', '.join(KEYPOINT_SOURCES)})")
        if source == 'encoder' and (model is None or model.encoder is None):
            raise ConfigurationError("encoder ソースにはエンコーダを含む学習済みモデルが必要です")
        self.source = source
        self.model = model
        self.batch_size = batch_size
        self.name = f'Keypoint({source}) + PnP'

    @torch.no_grad()
    def _encoder_keypoints(self, samples: List[Sample]) -> List[np.ndarray]:
        self.model.eval()
        keypoints = []
        for start in range(0, len(samples), self.batch_size):
            batch = collate_samples(samples[start:start + self.batch_size])
            device = next(self.model.parameters()).device
            y2d = self.model.encoder(batch['image'].to(device)).y2d
            keypoints.extend(y2d.double().cpu().numpy())
        return keypoints

    def estimate(self, samples: List[Sample]) -> List[PoseEstimate]:
        if self.source == 'gt':
            keypoints = [s.annotation.keypoints_2d for s in samples]
        else:
            keypoints = self._encoder_keypoints(samples)
        estimates = []
        for sample, points_2d in zip(samples, keypoints):
            annotation = sample.annotation
            problem = PnPProblem(
                points_3d_body=get_class_spec(annotation.class_id).propeller_layout,
                points_2d=points_2d,
                K=annotation.intrinsics,
            )
            try:
                pose = pnp_solve(problem)
            except ConvergenceError as e:
                logger.warning("サンプル %d の PnP が収束しませんでした（残差 %.3e）。最良の反復値を使います",
                               sample.index, e.residual)
                pose = e.best_pose
            estimates.append(PoseEstimate(
                r=pose.euler_norm,
                t=pose.translation,
                # 配置は正解クラスから引くのでクラス予測は持たない
                class_id=None,
                keypoints_2d=np.asarray(points_2d, dtype=float),
            ))
        return estimates
