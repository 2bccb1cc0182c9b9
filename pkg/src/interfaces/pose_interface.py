"""
姿勢推定システムの基底インターフェース
Dependency Inversion Principleを実装
"""
from abc import ABC, abstractmethod
from typing import Any, List


class IDatasetProvider(ABC):
    """データセットプロバイダーの基底インターフェース"""

    @abstractmethod
    def load_manifest(self) -> Any:
        """マニフェストを読み込み"""
        pass

    @abstractmethod
    def load_sample(self, index: int) -> Any:
        """
        サンプル（画像とアノテーション）を読み込み

        Args:
            index: 通し番号

        Returns:
            サンプル
        """
        pass

    @abstractmethod
    def get_split_indices(self, split: str) -> List[int]:
        """分割タグに属するサンプル番号を取得"""
        pass


class IPoseEstimator(ABC):
    """姿勢推定器の基底インターフェース"""

    name: str = 'estimator'

    @abstractmethod
    def estimate(self, samples: List[Any]) -> List[Any]:
        """
        サンプル列の姿勢を推定

        Args:
            samples: サンプルのリスト

        Returns:
            サンプルと同じ順序の姿勢推定値リスト
        """
        pass


class IModelEvaluator(ABC):
    """モデル評価の基底インターフェース"""

    @abstractmethod
    def evaluate(self, estimator: IPoseEstimator, split: str) -> Any:
        """
        推定器を評価

        Args:
            estimator: 評価対象の推定器
            split: 分割タグ

        Returns:
            評価レポート
        """
        pass


class IPoseService(ABC):
    """姿勢推定サービスの基底インターフェース"""

    @abstractmethod
    def estimate(self, indices: List[int], strategy: str = "dronekey") -> List[Any]:
        """
        指定した戦略で姿勢を推定

        Args:
            indices: サンプル番号
            strategy: 推定戦略

        Returns:
            姿勢推定値リスト
        """
        pass
