"""
評価サービスの実装
推定器をデータセットの分割に適用し、回転・並進の MAE / MedAE をシーン・クラスごとに集計する
"""
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from ..data.annotations import Sample
from ..data.data_provider import DroneDataProvider
from ..data.drone_classes import CLASS_NAMES
from ..data.torch_dataset import collate_samples
from ..geometry.pose import PoseEstimate
from ..geometry.rotations import euler_norm_to_matrix, relative_rotation_angle
from ..interfaces.exceptions import ConfigurationError
from ..interfaces.pose_interface import IModelEvaluator, IPoseEstimator
from ..models.checkpoint import load_checkpoint
from ..models.dronekey_model import DroneKeyModel
from ..models.pose_estimators import DroneKeyEstimator

logger = logging.getLogger(__name__)

AVERAGE_COLUMN = 'Average'
METRIC_LABELS = {
    'rot_mae_deg': 'Rotation MAE (deg)',
    'rot_medae_deg': 'Rotation MedAE (deg)',
    'trans_mae_m': 'Translation MAE (m)',
    'trans_medae_m': 'Translation MedAE (m)',
    'class_accuracy': 'Class accuracy',
    'keypoint_error_px': '2D keypoint error (px)',
}
PREDICTION_COLUMNS = ['frame', 'rx', 'ry', 'rz', 'tx', 'ty', 'tz']


def lower_median(values) -> float:
    """中央値（偶数個のときは小さい方の中央値）"""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        return float('nan')
    return float(ordered[(ordered.size - 1) // 2])


def rotation_errors(pred_r, gt_r) -> np.ndarray:
    """正規化回転誤差 [0, 1]（1 が 180°）"""
    return relative_rotation_angle(euler_norm_to_matrix(pred_r), euler_norm_to_matrix(gt_r))


def translation_errors(pred_t, gt_t) -> np.ndarray:
    return np.linalg.norm(np.asarray(pred_t, dtype=float) - np.asarray(gt_t, dtype=float), axis=-1)


def summarize_errors(frame: pd.DataFrame) -> Dict[str, float]:
    """サンプル単位の誤差表から指標を計算"""
    summary = {
        'samples': int(len(frame)),
        'rot_mae_deg': float(frame['rot_err_deg'].mean()),
        'rot_medae_deg': lower_median(frame['rot_err_deg']),
        'trans_mae_m': float(frame['trans_err_m'].mean()),
        'trans_medae_m': lower_median(frame['trans_err_m']),
    }
    if 'class_correct' in frame and frame['class_correct'].notna().any():
        summary['class_accuracy'] = float(frame['class_correct'].dropna().astype(float).mean())
    if 'keypoint_err_px' in frame and frame['keypoint_err_px'].notna().any():
        summary['keypoint_error_px'] = float(frame['keypoint_err_px'].mean())
    return summary


@dataclass
class EvaluationReport:
    """評価レポート（サンプル単位の誤差と集計）"""

    method: str
    split: str
    samples: pd.DataFrame
    fps: Optional[float] = None
    device: str = 'cpu'
    extra: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> pd.DataFrame:
        """(シーン, クラス) ごとの集計と全体平均"""
        rows = []
        for (scene_id, class_name), group in self.samples.groupby(['scene_id', 'class_name'], sort=True):
            rows.append({'group': f"{scene_id}/{class_name}", **summarize_errors(group)})
        rows.append({'group': AVERAGE_COLUMN, **summarize_errors(self.samples)})
        return pd.DataFrame(rows).set_index('group')

    @property
    def overall(self) -> Dict[str, float]:
        return summarize_errors(self.samples)

    def to_table(self) -> pd.DataFrame:
        """行が (手法, 指標)、列が シーン/クラス と Average の表"""
        summary = self.summary()
        metrics = [m for m in METRIC_LABELS if m in summary.columns]
        table = summary[metrics].T
        table.index = pd.MultiIndex.from_tuples([(self.method, METRIC_LABELS[m]) for m in metrics],
                                                names=['method', 'metric'])
        return table

    def save(self, out_dir: str) -> Dict[str, str]:
        """レポート・サンプル単位誤差・シーケンスごとの予測軌跡を書き出す"""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            'report': os.path.join(out_dir, 'report.csv'),
            'per_sample': os.path.join(out_dir, 'per_sample_errors.csv'),
        }
        table = self.to_table()
        if self.fps is not None:
            table.loc[(self.method, f'FPS ({self.device})'), AVERAGE_COLUMN] = self.fps
        table.to_csv(paths['report'], float_format='%.6f')
        self.samples.to_csv(paths['per_sample'], index=False, float_format='%.6f')
        prediction_dir = os.path.join(out_dir, 'predictions')
        for sequence, group in self.samples.groupby('sequence', sort=True):
            path = os.path.join(prediction_dir, *sequence.split('/')) + '.csv'
            os.makedirs(os.path.dirname(path), exist_ok=True)
            track = group.sort_values('frame_index').rename(columns={
                'frame_index': 'frame', 'pred_rx': 'rx', 'pred_ry': 'ry', 'pred_rz': 'rz',
                'pred_tx': 'tx', 'pred_ty': 'ty', 'pred_tz': 'tz',
            })[PREDICTION_COLUMNS]
            track.to_csv(path, index=False, float_format='%.6f')
        paths['predictions'] = prediction_dir
        logger.info("評価レポートを書き出しました: %s", paths['report'])
        return paths


def build_error_table(samples: Sequence[Sample], estimates: Sequence[PoseEstimate],
                      sample_table: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """サンプルと推定値からサンプル単位の誤差表を作成"""
    if len(samples) != len(estimates):
        raise ConfigurationError(f"サンプル数と推定値の数が一致しません: {len(samples)} != {len(estimates)}")
    pred_r = np.array([e.r for e in estimates])
    pred_t = np.array([e.t for e in estimates])
    gt_r = np.array([s.annotation.euler_norm for s in samples])
    gt_t = np.array([s.annotation.translation for s in samples])
    rot_norm = rotation_errors(pred_r, gt_r) if len(samples) else np.zeros(0)
    trans = translation_errors(pred_t, gt_t) if len(samples) else np.zeros(0)

    rows = []
    for k, (sample, estimate) in enumerate(zip(samples, estimates)):
        annotation = sample.annotation
        keypoint_err = None
        if estimate.keypoints_2d is not None:
            keypoint_err = float(np.mean(np.linalg.norm(estimate.keypoints_2d - annotation.keypoints_2d, axis=-1)))
        rows.append({
            'index': sample.index,
            'scene_id': annotation.scene_id,
            'class_id': int(annotation.class_id),
            'class_name': CLASS_NAMES[annotation.class_id],
            'background_id': int(annotation.background_id),
            'frame_index': int(annotation.frame_index),
            'rot_err_norm': float(rot_norm[k]),
            'rot_err_deg': float(rot_norm[k]) * 180.0,
            'trans_err_m': float(trans[k]),
            'pred_class': estimate.class_id,
            'class_correct': None if estimate.class_id is None else bool(estimate.class_id == annotation.class_id),
            'keypoint_err_px': keypoint_err,
            'pred_rx': pred_r[k, 0], 'pred_ry': pred_r[k, 1], 'pred_rz': pred_r[k, 2],
            'pred_tx': pred_t[k, 0], 'pred_ty': pred_t[k, 1], 'pred_tz': pred_t[k, 2],
        })
    frame = pd.DataFrame(rows)
    if sample_table is not None and not frame.empty:
        frame = frame.merge(sample_table[['index', 'sequence']], on='index', how='left')
    elif not frame.empty:
        frame['sequence'] = [f"{r.scene_id}/{r.class_name}/bg{r.background_id:02d}" for r in frame.itertuples()]
    return frame


class PoseEvaluator(IModelEvaluator):
    """推定器の評価（Single Responsibility Principle）"""

    def __init__(self, data_provider: DroneDataProvider, chunk_size: int = 64, show_progress: bool = True):
        self.data_provider = data_provider
        self.chunk_size = chunk_size
        self.show_progress = show_progress

    def evaluate(self, estimator: IPoseEstimator, split: str) -> EvaluationReport:
        """
        推定器を分割全体に適用して誤差を集計

        Args:
            estimator: 評価対象の推定器
            split: 分割タグ

        Returns:
            評価レポート
        """
        indices = self.data_provider.get_split_indices(split)
        if not indices:
            raise ConfigurationError(f"分割 '{split}' にサンプルがありません")
        samples: List[Sample] = []
        estimates: List[PoseEstimate] = []
        chunks = range(0, len(indices), self.chunk_size)
        for start in tqdm(chunks, desc=f"評価 ({estimator.name}, {split})", disable=not self.show_progress):
            chunk = [self.data_provider.load_sample(i) for i in indices[start:start + self.chunk_size]]
            samples.extend(chunk)
            estimates.extend(estimator.estimate(chunk))
        frame = build_error_table(samples, estimates, self.data_provider.get_sample_table(split))
        report = EvaluationReport(method=estimator.name, split=split, samples=frame)
        overall = report.overall
        logger.info("%s (%s): 回転 MAE %.3f°, 並進 MAE %.4f m", estimator.name, split,
                    overall['rot_mae_deg'], overall['trans_mae_m'])
        return report


def evaluate_checkpoint(checkpoint_path: str, data_provider: DroneDataProvider, split: str = 'test',
                        measure_speed: bool = False, device: str = 'cpu') -> EvaluationReport:
    """チェックポイントを読み込み、データセットの解像度と照合してから評価"""
    manifest = data_provider.load_manifest()
    model, _ = load_checkpoint(checkpoint_path, expected_resolution=manifest.resolution)
    report = PoseEvaluator(data_provider).evaluate(DroneKeyEstimator(model), split)
    if measure_speed:
        report.fps = measure_fps(model, data_provider.load_sample(data_provider.get_split_indices(split)[0]),
                                 device=device)
        report.device = device
    return report


@torch.no_grad()
def measure_fps(model: DroneKeyModel, sample: Sample, device: str = 'cpu',
                warmup: int = 10, runs: int = 100) -> float:
    """
    1枚ずつの順伝播の処理速度（フレーム/秒）

    入力テンソルは計測前に作成するため、データセットの I/O は含まない。
    ウォームアップ後に runs 回計測し、1回あたりの時間の中央値から求める
    """
    if runs < 1:
        raise ConfigurationError("計測回数は1以上である必要があります")
    model = model.to(device).eval()
    batch = {k: v.to(device) for k, v in collate_samples([sample]).items()}

    def forward():
        model(batch['k_inv'], images=batch['image'],
              keypoints_2d=batch['keypoints_2d'], class_ids=batch['class_id'])
        if device.startswith('cuda'):
            torch.cuda.synchronize()

    for _ in range(warmup):
        forward()
    timings = []
    for _ in range(runs):
        start = time.perf_counter()
        forward()
        timings.append(time.perf_counter() - start)
    fps = 1.0 / float(np.median(timings))
    logger.info("処理速度: %.2f FPS (%s)", fps, device)
    return fps
