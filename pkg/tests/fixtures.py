"""
テスト用の共有データセット
小さな合成データセットを一時ディレクトリに1度だけ生成して使い回す
"""
import os
import sys
import tempfile
from typing import Dict

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data.dataset_generator import DatasetConfig, SceneSpec, generate_dataset  # noqa: E402

SLOW_TESTS_ENV_VAR = 'DRONEKEY_SLOW_TESTS'

_workspace = tempfile.TemporaryDirectory(prefix='dronekey-tests-')
_generated: Dict[str, str] = {}


def slow_tests_enabled() -> bool:
    return os.environ.get(SLOW_TESTS_ENV_VAR, '') not in ('', '0')


def micro_config(seed: int = 0) -> DatasetConfig:
    """train/valid/test 各8フレーム（2クラス × 4フレーム）"""
    return DatasetConfig(
        scenes=[
            SceneSpec('01', 'linear', duration=1.0, fps=4.0, n_backgrounds=1),
            SceneSpec('03', 'linear', duration=1.0, fps=4.0, n_backgrounds=1),
            SceneSpec('06', 'non-linear', duration=1.0, fps=4.0, n_backgrounds=1),
        ],
        class_ids=[0, 6],
        resolution=(128, 128),
        seed=seed,
    )


def micro_dataset(seed: int = 0) -> str:
    """micro_config のデータセットのルート（プロセス内で共有、読み取り専用で使う）"""
    key = f"micro-{seed}"
    if key not in _generated:
        root = os.path.join(_workspace.name, key)
        generate_dataset(micro_config(seed), root)
        _generated[key] = root
    return _generated[key]


def scratch_dir(name: str) -> str:
    """共有作業領域内の新しいディレクトリ"""
    return tempfile.mkdtemp(prefix=f"{name}-", dir=_workspace.name)
