"""
データプロバイダーの実装（生成済み合成データセット対応）
Interface Segregation Principleを実装
"""
import bisect
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from ..interfaces.exceptions import DatasetLoadError
from ..interfaces.pose_interface import IDatasetProvider
from .annotations import Annotation, Sample
from .dataset_generator import DatasetManifest, SequenceRecord, frame_paths

logger = logging.getLogger(__name__)

DATA_ENV_VAR = 'DRONEKEY_DATA'


def default_data_dir() -> str:
    """環境変数 DRONEKEY_DATA（未設定なら ./data）"""
    return os.environ.get(DATA_ENV_VAR, 'data')


class DroneDataProvider(IDatasetProvider):
    """ドローンデータプロバイダー（Single Responsibility Principle）"""

    def __init__(self, data_dir: Optional[str] = None, cache_images: bool = False):
        self.data_dir = data_dir or default_data_dir()
        self.cache_images = cache_images  # 小規模データで学習を速くするための画像キャッシュ
        self._manifest: Optional[DatasetManifest] = None
        self._offsets: Optional[List[int]] = None
        self._image_cache: Dict[int, np.ndarray] = {}

    def load_manifest(self) -> DatasetManifest:
        """マニフェストを読み込み"""
        if self._manifest is None:
            self._manifest = DatasetManifest.load(self.data_dir)
            offsets = [0]
            for record in self._manifest.sequences:
                offsets.append(offsets[-1] + record.frames)
            self._offsets = offsets
            logger.info("マニフェストを読み込みました: %s (%d フレーム)",
                        self.data_dir, self._manifest.total_frames)
        return self._manifest

    def __len__(self) -> int:
        return self.load_manifest().total_frames

    def locate(self, index: int) -> Tuple[SequenceRecord, int]:
        """通し番号を (サブシーケンス, フレーム番号) に変換"""
        manifest = self.load_manifest()
        if not 0 <= index < manifest.total_frames:
            raise IndexError(f"サンプル番号が範囲外です: {index} (総数 {manifest.total_frames})")
        position = bisect.bisect_right(self._offsets, index) - 1
        return manifest.sequences[position], index - self._offsets[position]

    def load_annotation(self, index: int) -> Annotation:
        record, frame_index = self.locate(index)
        _, annotation_path = frame_paths(self.data_dir, record, frame_index)
        try:
            with open(annotation_path, 'r', encoding='utf-8') as f:
                return Annotation.from_line(f.readline())
        except FileNotFoundError as e:
            raise DatasetLoadError(annotation_path, "アノテーションファイルが見つかりません") from e
        except (ValueError, KeyError, TypeError) as e:
            raise DatasetLoadError(annotation_path, f"アノテーションが破損しています: {e}") from e

    def load_image(self, index: int) -> np.ndarray:
        if index in self._image_cache:
            return self._image_cache[index]
        record, frame_index = self.locate(index)
        image_path, _ = frame_paths(self.data_dir, record, frame_index)
        try:
            with Image.open(image_path) as image:
                array = np.asarray(image.convert('RGB'))
        except FileNotFoundError as e:
            raise DatasetLoadError(image_path, "画像ファイルが見つかりません") from e
        except (UnidentifiedImageError, OSError) as e:
            raise DatasetLoadError(image_path, f"画像が破損しています: {e}") from e
        expected = tuple(self.load_manifest().resolution[::-1])
        if array.shape[:2] != expected:
            raise DatasetLoadError(image_path, f"解像度が一致しません: {array.shape[:2]} != {expected}")
        if self.cache_images:
            self._image_cache[index] = array
        return array

    def load_sample(self, index: int) -> Sample:
        """画像とアノテーションを読み込み"""
        record, frame_index = self.locate(index)
        image_path, _ = frame_paths(self.data_dir, record, frame_index)
        return Sample(
            image=self.load_image(index),
            annotation=self.load_annotation(index),
            index=index,
            image_path=image_path,
        )

    def get_split_indices(self, split: str) -> List[int]:
        """分割タグに属するサンプル番号を取得"""
        manifest = self.load_manifest()
        indices = []
        for position, record in enumerate(manifest.sequences):
            if record.split == split:
                start = self._offsets[position]
                indices.extend(range(start, start + record.frames))
        return indices

    def get_sequence_indices(self) -> Dict[str, List[int]]:
        """サブシーケンスごとのサンプル番号（キーは scene/class/bg）"""
        manifest = self.load_manifest()
        return {
            record.relative_dir.replace(os.sep, '/'): list(range(self._offsets[i], self._offsets[i + 1]))
            for i, record in enumerate(manifest.sequences)
        }

    def get_sample_table(self, split: Optional[str] = None) -> pd.DataFrame:
        """サンプル番号とシーン・クラス・背景の対応表"""
        manifest = self.load_manifest()
        rows = []
        for position, record in enumerate(manifest.sequences):
            if split is not None and record.split != split:
                continue
            start = self._offsets[position]
            for frame_index in range(record.frames):
                rows.append({
                    'index': start + frame_index,
                    'scene_id': record.scene_id,
                    'class_id': record.class_id,
                    'class_name': record.class_name,
                    'background_id': record.background_id,
                    'frame_index': frame_index,
                    'sequence': record.relative_dir.replace(os.sep, '/'),
                })
        return pd.DataFrame(rows)
