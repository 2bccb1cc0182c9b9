"""
ドローン姿勢推定パイプラインの例外階層
呼び出し側が組み込み例外でも捕捉できるよう、近い組み込み例外を併せて継承する
"""
from typing import Any, Dict, Optional


class DroneKeyError(Exception):
    """パイプライン共通の基底例外"""


class ConfigurationError(DroneKeyError, ValueError):
    """設定値・カメラ内部パラメータ・戦略名などが不正"""


class ShapeError(DroneKeyError, ValueError):
    """配列・テンソルの形状不一致"""


class BehindCameraError(DroneKeyError, ValueError):
    """カメラ後方 (z <= 0) の点を投影しようとした"""


class VisibilityError(DroneKeyError, ValueError):
    """プロペラがカメラ後方にあり、フレームを描画できない"""


class DatasetExistsError(DroneKeyError, FileExistsError):
    """出力ディレクトリが既に存在し、上書きが許可されていない"""


class DatasetLoadError(DroneKeyError, OSError):
    """データセットファイルの欠損・破損"""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class DegeneracyError(DroneKeyError, ValueError):
    """退化した入力（共線な点群、全て同一の特徴ベクトルなど）"""


class ConvergenceError(DroneKeyError, RuntimeError):
    """反復ソルバーが最大反復回数内に収束しなかった"""

    def __init__(self, message: str, best_pose: Any = None, residual: float = float("nan")):
        super().__init__(message)
        self.best_pose = best_pose
        self.residual = residual


class CheckpointError(DroneKeyError, OSError):
    """チェックポイントが見つからない・読み込めない"""


class CheckpointMismatchError(CheckpointError):
    """チェックポイントのヘッダーが評価設定と一致しない"""


class TrainingDivergedError(DroneKeyError, FloatingPointError):
    """学習中に NaN / inf の損失が発生した"""

    def __init__(self, message: str, record: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.record = record or {}


class PredictionParseError(DroneKeyError, ValueError):
    """予測ファイルの書式エラー（行番号付き）"""

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")
