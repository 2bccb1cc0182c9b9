"""
姿勢推定サービスの実装
Dependency Inversion Principleを実装
"""
import logging
from typing import Any, Dict, List, Optional

from ..data.data_provider import DroneDataProvider
from ..geometry.pose import PoseEstimate
from ..interfaces.exceptions import ConfigurationError
from ..interfaces.pose_interface import IPoseEstimator, IPoseService
from ..models.dronekey_model import DroneKeyModel
from ..models.pose_estimators import DroneKeyEstimator, PnPBaselineEstimator

logger = logging.getLogger(__name__)

STRATEGY_DESCRIPTIONS = {
    'dronekey': 'エンコーダ・デコーダによる事前情報なしの姿勢推定',
    'pnp-gt': '正解 2D キーポイント + 機体寸法を使う PnP',
    'pnp-encoder': 'エンコーダの 2D キーポイント + 機体寸法を使う PnP',
}


class PoseService(IPoseService):
    """姿勢推定サービス（Single Responsibility Principle）"""

    def __init__(self, data_provider: DroneDataProvider, model: Optional[DroneKeyModel] = None):
        self.data_provider = data_provider
        self.strategies: Dict[str, IPoseEstimator] = {'pnp-gt': PnPBaselineEstimator('gt')}
        if model is not None:
            self.strategies['dronekey'] = DroneKeyEstimator(model)
            if model.encoder is not None:
                self.strategies['pnp-encoder'] = PnPBaselineEstimator('encoder', model)

    def get_estimator(self, strategy: str) -> IPoseEstimator:
        if strategy not in self.strategies:
            raise ConfigurationError(
                f"サポートされていない戦略: {strategy} (利用可能: {', '.join(self.get_available_strategies())})")
        return self.strategies[strategy]

    def estimate(self, indices: List[int], strategy: str = "dronekey") -> List[PoseEstimate]:
        """
        指定した戦略で姿勢を推定

        Args:
            indices: サンプル番号
            strategy: 推定戦略 ('dronekey', 'pnp-gt', 'pnp-encoder')

        Returns:
            サンプル番号と同じ順序の姿勢推定値リスト
        """
        estimator = self.get_estimator(strategy)
        samples = [self.data_provider.load_sample(i) for i in indices]
        logger.debug("%s で %d サンプルを推定します", strategy, len(samples))
        return estimator.estimate(samples)

    def get_available_strategies(self) -> List[str]:
        """利用可能な推定戦略を取得"""
        return list(self.strategies.keys())

    def get_strategy_info(self, strategy: str) -> Dict[str, Any]:
        if strategy not in STRATEGY_DESCRIPTIONS:
            return {}
        return {
            'name': strategy,
            'description': STRATEGY_DESCRIPTIONS[strategy],
            'available': strategy in self.strategies,
        }
