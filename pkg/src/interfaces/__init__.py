"""
インターフェースパッケージ（抽象基底クラスと例外階層）
"""

from .exceptions import DroneKeyError
from .pose_interface import IDatasetProvider, IModelEvaluator, IPoseEstimator, IPoseService

__all__ = [
    'DroneKeyError',
    'IDatasetProvider',
    'IModelEvaluator',
    'IPoseEstimator',
    'IPoseService'
]
