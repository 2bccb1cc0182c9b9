"""
事前情報を使わない3D姿勢デコーダ
2D キーポイントをレイ方向に変換して埋め込み、クラス埋め込みと結合して
3D キーポイントと姿勢（正規化オイラー角・並進）を回帰する
"""
from dataclasses import dataclass
from typing import Optional, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.drone_classes import NUM_KEYPOINTS
from ..geometry.camera import CameraIntrinsics
from ..interfaces.exceptions import ShapeError
from .model_config import ModelConfig


@dataclass
class DecoderOutput:
    """デコーダ出力（y3d は構成 1, 2 では None）"""

    y3d: Optional[torch.Tensor]   # (B, 4, 3) メートル
    r_pred: torch.Tensor          # (B, 3) ∈ (0, 1)
    t_pred: torch.Tensor          # (B, 3) メートル

    @property
    def pose(self) -> torch.Tensor:
        return torch.cat([self.r_pred, self.t_pred], dim=-1)


def inverse_intrinsics(K: Union[CameraIntrinsics, torch.Tensor], batch: int,
                       dtype=torch.float32, device=None) -> torch.Tensor:
    """A^-1 を (B, 3, 3) のテンソルとして返す"""
    if isinstance(K, CameraIntrinsics):
        k_inv = torch.as_tensor(K.inverse_matrix(), dtype=dtype, device=device)
    else:
        k_inv = K.to(dtype=dtype, device=device)
    if k_inv.dim() == 2:
        k_inv = k_inv.expand(batch, 3, 3)
    if tuple(k_inv.shape) != (batch, 3, 3):
        raise ShapeError(f"内部パラメータ逆行列の形状が不正です: {tuple(k_inv.shape)}")
    return k_inv


def keypoint_rays(y2d: torch.Tensor, k_inv: torch.Tensor) -> torch.Tensor:
    """v_k = unit(A^-1 [u_k, v_k, 1]^T)、(B, 4, 3)"""
    homogeneous = torch.cat([y2d, torch.ones_like(y2d[..., :1])], dim=-1)
    rays = torch.einsum('bij,bkj->bki', k_inv, homogeneous)
    return F.normalize(rays, dim=-1)


def _mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.ReLU(), nn.Linear(hidden, out_dim))


class PoseDecoder(nn.Module):
    """
    3D 姿勢デコーダ

    decoder_variant:
        1: 解像度で正規化した y2d → MLP_pose
        2: e_ray → MLP_pose
        3: e_ray → MLP_3D、[e_ray, y3d] → MLP_pose
        4: [e_ray, e_cls] → MLP_3D、[f_fused, y3d] → MLP_pose
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.variant = config.decoder_variant
        hidden = config.hidden_dim
        self.register_buffer(
            'resolution_scale',
            torch.tensor([float(config.resolution[0]), float(config.resolution[1])]),
            persistent=False,
        )

        self.ray_embed = None
        self.class_embed = None
        self.mlp_3d = None
        if self.variant >= 2:
            self.ray_embed = nn.Linear(NUM_KEYPOINTS * 3, config.ray_embed_dim, bias=False)
        if self.variant >= 4:
            self.class_embed = nn.Linear(config.num_classes, config.class_embed_dim, bias=False)

        if self.variant == 1:
            feature_dim = NUM_KEYPOINTS * 2
        elif self.variant == 4:
            feature_dim = config.ray_embed_dim + config.class_embed_dim
        else:
            feature_dim = config.ray_embed_dim
        if self.variant >= 3:
            self.mlp_3d = _mlp(feature_dim, hidden, NUM_KEYPOINTS * 3)
            self.mlp_pose = _mlp(feature_dim + NUM_KEYPOINTS * 3, hidden, 6)
        else:
            self.mlp_pose = _mlp(feature_dim, hidden, 6)

    @property
    def uses_class(self) -> bool:
        return self.class_embed is not None

    def embed_rays(self, y2d: torch.Tensor, k_inv: torch.Tensor) -> torch.Tensor:
        """e_ray (B, 64)"""
        rays = keypoint_rays(y2d, k_inv)
        return self.ray_embed(rays.flatten(1))

    def embed_class(self, class_dist: torch.Tensor) -> torch.Tensor:
        """e_cls (B, 64)"""
        if self.config.class_input == 'onehot':
            class_dist = F.one_hot(class_dist.argmax(dim=-1), self.config.num_classes).to(class_dist.dtype)
        return self.class_embed(class_dist)

    @staticmethod
    def fuse(e_ray: torch.Tensor, e_cls: torch.Tensor) -> torch.Tensor:
        """f_fused = [e_ray, e_cls]"""
        if e_ray.dim() != e_cls.dim() or e_ray.shape[:-1] != e_cls.shape[:-1]:
            raise ShapeError(f"結合する特徴の形状が一致しません: {tuple(e_ray.shape)} と {tuple(e_cls.shape)}")
        return torch.cat([e_ray, e_cls], dim=-1)

    def predict_keypoints3d(self, features: torch.Tensor) -> torch.Tensor:
        return self.mlp_3d(features).view(-1, NUM_KEYPOINTS, 3)

    def predict_pose(self, features: torch.Tensor, y3d: Optional[torch.Tensor] = None):
        """MLP_pose の出力 6 値のうち先頭3つに sigmoid を適用"""
        if y3d is not None:
            features = torch.cat([features, y3d.flatten(1)], dim=-1)
        raw = self.mlp_pose(features)
        return torch.sigmoid(raw[:, :3]), raw[:, 3:]

    def forward(self, y2d: torch.Tensor, class_dist: Optional[torch.Tensor],
                k_inv: torch.Tensor) -> DecoderOutput:
        if y2d.dim() != 3 or tuple(y2d.shape[1:]) != (NUM_KEYPOINTS, 2):
            raise ShapeError(f"2D キーポイントの形状が不正です: {tuple(y2d.shape)}")
        if self.variant == 1:
            features = (y2d / self.resolution_scale.to(y2d.dtype)).flatten(1)
        else:
            features = self.embed_rays(y2d, k_inv)
            if self.uses_class:
                features = self.fuse(features, self.embed_class(class_dist))
        y3d = self.predict_keypoints3d(features) if self.mlp_3d is not None else None
        r_pred, t_pred = self.predict_pose(features, y3d)
        return DecoderOutput(y3d=y3d, r_pred=r_pred, t_pred=t_pred)
