"""
生成済みデータセットを PyTorch の Dataset として扱うためのアダプタ
"""
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from .annotations import Sample
from .data_provider import DroneDataProvider


def sample_to_tensors(sample: Sample, dtype=torch.float32) -> Dict[str, torch.Tensor]:
    annotation = sample.annotation
    image = torch.as_tensor(np.ascontiguousarray(sample.image), dtype=dtype).permute(2, 0, 1) / 255.0
    return {
        'image': image,
        'k_inv': torch.as_tensor(annotation.intrinsics.inverse_matrix(), dtype=dtype),
        'keypoints_2d': torch.as_tensor(annotation.keypoints_2d, dtype=dtype),
        'keypoints_3d': torch.as_tensor(annotation.keypoints_3d, dtype=dtype),
        'euler_norm': torch.as_tensor(annotation.euler_norm, dtype=dtype),
        'translation': torch.as_tensor(annotation.translation, dtype=dtype),
        'class_id': torch.tensor(int(annotation.class_id), dtype=torch.long),
        'index': torch.tensor(int(sample.index), dtype=torch.long),
    }


def collate_samples(samples: Sequence[Sample], dtype=torch.float32) -> Dict[str, torch.Tensor]:
    """サンプル列をバッチ辞書にまとめる"""
    items = [sample_to_tensors(s, dtype) for s in samples]
    return {key: torch.stack([item[key] for item in items]) for key in items[0]}


class DronePoseDataset(Dataset):
    """分割タグ（または番号リスト）で絞り込んだサンプル集合"""

    def __init__(self, provider: DroneDataProvider, split: Optional[str] = None,
                 indices: Optional[List[int]] = None, transform=None):
        self.provider = provider
        if indices is None:
            indices = provider.get_split_indices(split) if split else list(range(len(provider)))
        self.indices = list(indices)
        # データ拡張用のフック（既定では使わない）
        self.transform = transform

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, position: int) -> Dict[str, torch.Tensor]:
        sample = self.provider.load_sample(self.indices[position])
        if self.transform is not None:
            sample = self.transform(sample)
        return sample_to_tensors(sample)


class PhotometricJitter:
    """明るさ・コントラストのランダム変動（幾何は変えない）"""

    def __init__(self, seed: int = 0, strength: float = 0.2):
        self.rng = np.random.default_rng(seed)
        self.strength = strength

    def __call__(self, sample: Sample) -> Sample:
        gain = 1.0 + self.rng.uniform(-self.strength, self.strength)
        offset = 40.0 * self.rng.uniform(-self.strength, self.strength)
        image = np.clip(sample.image.astype(float) * gain + offset, 0, 255).astype(np.uint8)
        return Sample(image=image, annotation=sample.annotation, index=sample.index,
                      image_path=sample.image_path)
