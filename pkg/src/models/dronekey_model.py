"""
エンコーダとデコーダを結合したエンドツーエンドの姿勢推定モデル
"""
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..interfaces.exceptions import ConfigurationError
from .keypoint_encoder import EncoderOutput, KeypointEncoder
from .model_config import ModelConfig
from .pose_decoder import DecoderOutput, PoseDecoder


@dataclass
class ModelOutput:
    y2d: torch.Tensor              # デコーダに入力した 2D キーポイント
    class_dist: torch.Tensor
    decoder: DecoderOutput
    encoder: Optional[EncoderOutput] = None


class DroneKeyModel(nn.Module):
    """
    画像 → 2D キーポイント・クラス → 3D 姿勢

    use_encoder=False のときはエンコーダを持たず、正解キーポイントと
    one-hot のクラスラベルをデコーダに直接入力する
    """

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.encoder = KeypointEncoder(self.config) if self.config.use_encoder else None
        self.decoder = PoseDecoder(self.config)

    def forward(self, k_inv: torch.Tensor, images: Optional[torch.Tensor] = None,
                keypoints_2d: Optional[torch.Tensor] = None,
                class_ids: Optional[torch.Tensor] = None) -> ModelOutput:
        if self.encoder is not None:
            if images is None:
                raise ConfigurationError("エンコーダ有効時は画像が必要です")
            encoded = self.encoder(images)
            y2d, class_dist = encoded.y2d, encoded.class_dist
        else:
            if keypoints_2d is None or class_ids is None:
                raise ConfigurationError("エンコーダ無効時は正解キーポイントとクラスラベルが必要です")
            encoded = None
            y2d = keypoints_2d
            class_dist = F.one_hot(class_ids.long(), self.config.num_classes).to(keypoints_2d.dtype)
        decoded = self.decoder(y2d, class_dist, k_inv)
        return ModelOutput(y2d=y2d, class_dist=class_dist, decoder=decoded, encoder=encoded)
