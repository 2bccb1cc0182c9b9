"""
サービスパッケージ
"""

from .baseline_service import evaluate_baseline, run_baseline
from .evaluation_service import EvaluationReport, PoseEvaluator, evaluate_checkpoint, measure_fps
from .pose_service import PoseService
from .training_service import TrainConfig, Trainer, select_checkpoint, train

__all__ = [
    'evaluate_baseline',
    'run_baseline',
    'EvaluationReport',
    'PoseEvaluator',
    'evaluate_checkpoint',
    'measure_fps',
    'PoseService',
    'TrainConfig',
    'Trainer',
    'select_checkpoint',
    'train'
]
