"""
姿勢推定モデルパッケージ
"""

from .dronekey_model import DroneKeyModel
from .keypoint_encoder import KeypointEncoder
from .model_config import ModelConfig
from .pnp_solver import PnPProblem, pnp_solve
from .pose_decoder import PoseDecoder
from .pose_estimators import DroneKeyEstimator, PnPBaselineEstimator

__all__ = [
    'DroneKeyModel',
    'KeypointEncoder',
    'ModelConfig',
    'PnPProblem',
    'pnp_solve',
    'PoseDecoder',
    'DroneKeyEstimator',
    'PnPBaselineEstimator'
]
