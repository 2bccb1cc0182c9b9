"""
キーポイント + PnP ベースラインの実行
"""
import logging
from typing import List, Optional

from ..data.data_provider import DroneDataProvider
from ..geometry.pose import PoseEstimate
from ..interfaces.exceptions import CheckpointError, ConfigurationError
from ..models.checkpoint import load_checkpoint
from ..models.pose_estimators import KEYPOINT_SOURCES
from .evaluation_service import EvaluationReport, PoseEvaluator
from .pose_service import PoseService

logger = logging.getLogger(__name__)


def _service_for(data_provider: DroneDataProvider, source: str,
                 checkpoint_path: Optional[str]) -> PoseService:
    if source not in KEYPOINT_SOURCES:
        raise ConfigurationError(f"サポートされていないキーポイントソース: {source} (候補: {', '.join(KEYPOINT_SOURCES)})")
    model = None
    if source == 'encoder':
        if not checkpoint_path:
            raise CheckpointError("encoder ソースにはチェックポイントの指定が必要です")
        model, _ = load_checkpoint(checkpoint_path, expected_resolution=data_provider.load_manifest().resolution)
        if model.encoder is None:
            raise ConfigurationError(f"チェックポイントにエンコーダが含まれていません: {checkpoint_path}")
    return PoseService(data_provider, model)


def run_baseline(data_provider: DroneDataProvider, split: str, source: str = 'gt',
                 checkpoint_path: Optional[str] = None) -> List[PoseEstimate]:
    """
    分割内の全フレームを PnP で推定（寸法の事前情報には正解クラスの配置を使う）

    Args:
        data_provider: データプロバイダー
        split: 分割タグ
        source: 'gt'（正解キーポイント）または 'encoder'（学習済みエンコーダ）
        checkpoint_path: source='encoder' のときのチェックポイント

    Returns:
        フレームごとの姿勢推定値
    """
    logger.info("ベースライン (%s) を分割 %s で実行します", source, split)
    service = _service_for(data_provider, source, checkpoint_path)
    return service.estimate(data_provider.get_split_indices(split), f'pnp-{source}')


def evaluate_baseline(data_provider: DroneDataProvider, split: str, source: str = 'gt',
                      checkpoint_path: Optional[str] = None) -> EvaluationReport:
    """ベースラインを評価し、提案モデルと同じ形式のレポートを返す"""
    service = _service_for(data_provider, source, checkpoint_path)
    estimator = service.get_estimator(f'pnp-{source}')
    return PoseEvaluator(data_provider).evaluate(estimator, split)
