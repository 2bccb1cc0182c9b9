"""
合成データセットの生成
シーン × クラス × 背景のサブシーケンスを描画し、マニフェストとフレームファイルを書き出す
"""
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from ..geometry.camera import CameraIntrinsics
from ..interfaces.exceptions import ConfigurationError, DatasetExistsError, DatasetLoadError
from .drone_classes import CLASS_NAMES, get_class_spec
from .renderer import render_frame
from .trajectory import MOTION_KINDS, SceneConfig, frame_count, synth_trajectory

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = 'manifest.json'
SPLITS = ('train', 'valid', 'test')

# シナリオ単位の分割
DEFAULT_SPLITS = {
    'valid': ('03', '09', '13'),
    'test': ('06', '07'),
}


def split_for_scene(scene_id: str, splits: Optional[Dict[str, Tuple[str, ...]]] = None) -> str:
    """シーンIDから分割タグを決定（valid/test に無いものは train）"""
    table = DEFAULT_SPLITS if splits is None else splits
    for tag, scene_ids in table.items():
        if scene_id in scene_ids:
            return tag
    return 'train'


@dataclass
class SceneSpec:
    """データセット設定内の1シーン"""

    scene_id: str
    motion_kind: str
    duration: float
    fps: float
    n_backgrounds: int = 3

    def __post_init__(self):
        if self.motion_kind not in MOTION_KINDS:
            raise ConfigurationError(f"サポートされていない運動種別: {self.motion_kind}")
        if self.n_backgrounds < 1:
            raise ConfigurationError("背景数は1以上である必要があります")
        frame_count(self.duration, self.fps)


@dataclass
class DatasetConfig:
    """データセット生成設定"""

    scenes: List[SceneSpec]
    class_ids: List[int]
    resolution: Tuple[int, int] = (128, 128)
    intrinsics: Optional[CameraIntrinsics] = None
    depth_range: Tuple[float, float] = (0.8, 2.0)
    seed: int = 0
    splits: Dict[str, Tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SPLITS))

    def __post_init__(self):
        if not self.scenes:
            raise ConfigurationError("シーンが1つもありません")
        if not self.class_ids:
            raise ConfigurationError("クラスが1つもありません")
        for class_id in self.class_ids:
            get_class_spec(class_id)
        scene_ids = [scene.scene_id for scene in self.scenes]
        if len(set(scene_ids)) != len(scene_ids):
            raise ConfigurationError(f"シーンIDが重複しています: {scene_ids}")
        self.resolution = (int(self.resolution[0]), int(self.resolution[1]))
        if self.intrinsics is None:
            self.intrinsics = CameraIntrinsics.from_field_of_view(*self.resolution)


def desk_preset(seed: int = 0) -> DatasetConfig:
    """机上規模のプリセット（train/valid/test に1シーンずつ、2クラス）"""
    return DatasetConfig(
        scenes=[
            SceneSpec('01', 'linear', duration=2.0, fps=10.0, n_backgrounds=1),
            SceneSpec('03', 'linear', duration=2.0, fps=10.0, n_backgrounds=1),
            SceneSpec('06', 'non-linear', duration=2.0, fps=10.0, n_backgrounds=1),
        ],
        class_ids=[0, 6],
        resolution=(128, 128),
        depth_range=(0.8, 2.0),
        seed=seed,
    )


def overfit_preset(seed: int = 0) -> DatasetConfig:
    """過学習確認用（1シーン・2クラス・計200フレーム）"""
    return DatasetConfig(
        scenes=[SceneSpec('01', 'linear', duration=10.0, fps=10.0, n_backgrounds=1)],
        class_ids=[0, 6],
        resolution=(128, 128),
        depth_range=(0.8, 2.0),
        seed=seed,
    )


def table2_preset(seed: int = 0) -> DatasetConfig:
    """全規模の構成（13シーン × 7クラス × 3背景、1920x1080、30 FPS）"""
    scenes = []
    for number in range(1, 14):
        motion = 'linear' if number in (1, 2, 3, 7, 8, 9) else 'non-linear'
        duration = 12.0 if number >= 10 else 4.0
        scenes.append(SceneSpec(f"{number:02d}", motion, duration=duration, fps=30.0, n_backgrounds=3))
    return DatasetConfig(
        scenes=scenes,
        class_ids=list(range(len(CLASS_NAMES))),
        resolution=(1920, 1080),
        depth_range=(2.0, 6.0),
        seed=seed,
    )


PRESETS = {
    'desk': desk_preset,
    'overfit': overfit_preset,
    'table2': table2_preset,
}


@dataclass
class SequenceRecord:
    """マニフェスト内の1サブシーケンス（シーン・クラス・背景）"""

    scene_id: str
    class_id: int
    class_name: str
    background_id: int
    background_seed: int
    trajectory_seed: int
    motion_kind: str
    duration: float
    fps: float
    frames: int
    split: str

    @property
    def relative_dir(self) -> str:
        return os.path.join(self.scene_id, self.class_name, f"bg{self.background_id:02d}")


@dataclass
class DatasetManifest:
    """データセット全体のマニフェスト"""

    sequences: List[SequenceRecord]
    intrinsics: CameraIntrinsics
    resolution: Tuple[int, int]
    depth_range: Tuple[float, float]
    seed: int
    format_version: int = FORMAT_VERSION

    @property
    def total_frames(self) -> int:
        return sum(record.frames for record in self.sequences)

    @property
    def sequence_count(self) -> int:
        """(シーン, クラス) の組の数"""
        return len({(record.scene_id, record.class_id) for record in self.sequences})

    @property
    def subsequence_count(self) -> int:
        return len(self.sequences)

    def frames_per_split(self) -> Dict[str, int]:
        totals = {tag: 0 for tag in SPLITS}
        for record in self.sequences:
            totals[record.split] = totals.get(record.split, 0) + record.frames
        return totals

    def sequences_per_split(self) -> Dict[str, int]:
        counts = {tag: set() for tag in SPLITS}
        for record in self.sequences:
            counts.setdefault(record.split, set()).add((record.scene_id, record.class_id))
        return {tag: len(pairs) for tag, pairs in counts.items()}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.sequences])

    def to_dict(self) -> Dict:
        return {
            'format_version': self.format_version,
            'seed': self.seed,
            'resolution': list(self.resolution),
            'depth_range': list(self.depth_range),
            'intrinsics': self.intrinsics.to_dict(),
            'splits': sorted({(r.scene_id, r.split) for r in self.sequences}),
            'sequences': [asdict(record) for record in self.sequences],
        }

    def save(self, root: str) -> str:
        path = os.path.join(root, MANIFEST_NAME)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')
        return path

    @classmethod
    def load(cls, root: str) -> "DatasetManifest":
        path = os.path.join(root, MANIFEST_NAME)
        if not os.path.exists(path):
            raise DatasetLoadError(path, "マニフェストが見つかりません")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
            if data.get('format_version') != FORMAT_VERSION:
                raise DatasetLoadError(path, f"未対応の形式バージョン: {data.get('format_version')}")
            return cls(
                sequences=[SequenceRecord(**record) for record in data['sequences']],
                intrinsics=CameraIntrinsics.from_dict(data['intrinsics']),
                resolution=tuple(data['resolution']),
                depth_range=tuple(data['depth_range']),
                seed=int(data['seed']),
                format_version=int(data['format_version']),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetLoadError(path, f"マニフェストが破損しています: {e}") from e


def _derived_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1)[0])


def build_manifest(config: DatasetConfig) -> DatasetManifest:
    """
    描画せずにマニフェストを計画（フレーム数は閉じた式 duration·fps の総和）

    Args:
        config: データセット生成設定

    Returns:
        マニフェスト
    """
    records = []
    for scene_index, scene in enumerate(config.scenes):
        scene_number = int(scene.scene_id) if scene.scene_id.isdigit() else scene_index
        split = split_for_scene(scene.scene_id, config.splits)
        frames = frame_count(scene.duration, scene.fps)
        for class_id in config.class_ids:
            for k in range(scene.n_backgrounds):
                background_id = scene_index * scene.n_backgrounds + k
                records.append(SequenceRecord(
                    scene_id=scene.scene_id,
                    class_id=class_id,
                    class_name=CLASS_NAMES[class_id],
                    background_id=background_id,
                    # 背景は同じシーン内のクラス間で共有する
                    background_seed=_derived_seed(config.seed, scene_number, 10_000 + k),
                    trajectory_seed=_derived_seed(config.seed, scene_number, class_id, background_id),
                    motion_kind=scene.motion_kind,
                    duration=scene.duration,
                    fps=scene.fps,
                    frames=frames,
                    split=split,
                ))
    return DatasetManifest(
        sequences=records,
        intrinsics=config.intrinsics,
        resolution=config.resolution,
        depth_range=tuple(config.depth_range),
        seed=config.seed,
    )


def scene_config_for(record: SequenceRecord, manifest: DatasetManifest) -> SceneConfig:
    return SceneConfig(
        scene_id=record.scene_id,
        motion_kind=record.motion_kind,
        duration=record.duration,
        fps=record.fps,
        backgrounds=[record.background_seed],
        camera=manifest.intrinsics,
        rng_seed=record.trajectory_seed,
        resolution=manifest.resolution,
        depth_range=manifest.depth_range,
    )


def frame_paths(root: str, record: SequenceRecord, frame_index: int) -> Tuple[str, str]:
    """フレームの画像パスとアノテーションパス"""
    base = os.path.join(root, record.relative_dir, f"frame_{frame_index:05d}")
    return base + '.png', base + '.ann'


def _render_subsequence(args) -> int:
    root, record, manifest = args
    cfg = scene_config_for(record, manifest)
    spec = get_class_spec(record.class_id)
    os.makedirs(os.path.join(root, record.relative_dir), exist_ok=True)
    for frame_index, pose in enumerate(synth_trajectory(cfg)):
        image, annotation = render_frame(cfg, pose, spec, frame_index, background_id=record.background_id)
        if not annotation.passes_reprojection_check():
            raise ConfigurationError(
                f"再投影誤差が許容値を超えました: {annotation.reprojection_error():.3f} px"
            )
        image_path, annotation_path = frame_paths(root, record, frame_index)
        Image.fromarray(image).save(image_path)
        with open(annotation_path, 'w', encoding='utf-8') as f:
            f.write(annotation.to_line() + '\n')
    return record.frames


def generate_dataset(config: DatasetConfig, out_dir: str, overwrite: bool = False,
                     workers: int = 1) -> DatasetManifest:
    """
    データセットを生成してディスクに書き出す

    Args:
        config: データセット生成設定
        out_dir: 出力ルート
        overwrite: 既存ディレクトリを置き換えるか
        workers: 並列プロセス数（結果は直列実行と同一）

    Returns:
        書き出したマニフェスト
    """
    if os.path.exists(out_dir) and os.listdir(out_dir) and not overwrite:
        raise DatasetExistsError(f"出力ディレクトリが既に存在します（--overwrite で上書き）: {out_dir}")

    manifest = build_manifest(config)
    # 同じ親ディレクトリの作業領域に書き出し、完成してから置き換える
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=f".{os.path.basename(out_dir)}-partial-", dir=parent)
    os.chmod(staging, 0o755)
    jobs = [(staging, record, manifest) for record in manifest.sequences]
    logger.info("サブシーケンス %d 件、計 %d フレームを生成します", len(jobs), manifest.total_frames)

    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                written = sum(executor.map(_render_subsequence, jobs))
        else:
            written = sum(_render_subsequence(job) for job in jobs)
        manifest.save(staging)
    except BaseException:
        logger.error("データセット生成に失敗しました。作業領域を削除します: %s", staging)
        shutil.rmtree(staging, ignore_errors=True)
        raise

    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.replace(staging, out_dir)
    logger.info("データセットを書き出しました: %s (%d フレーム)", out_dir, written)
    return manifest
