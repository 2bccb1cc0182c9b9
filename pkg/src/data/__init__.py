"""
データパッケージ（機体クラス、合成データセットの生成と読み込み）
"""

from .annotations import Annotation, Sample
from .data_provider import DroneDataProvider, default_data_dir
from .dataset_generator import PRESETS, DatasetConfig, DatasetManifest, SceneSpec, generate_dataset
from .drone_classes import CLASS_NAMES, NUM_CLASSES, NUM_KEYPOINTS, get_class_spec

__all__ = [
    'Annotation',
    'Sample',
    'DroneDataProvider',
    'default_data_dir',
    'PRESETS',
    'DatasetConfig',
    'DatasetManifest',
    'SceneSpec',
    'generate_dataset',
    'CLASS_NAMES',
    'NUM_CLASSES',
    'NUM_KEYPOINTS',
    'get_class_spec'
]
