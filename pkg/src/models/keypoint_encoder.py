"""
キーポイントエンコーダ
CNN バックボーン → トークン化 → [cls] トークン付き自己注意層 → 層ごとのゲート付き和でキーポイント回帰、
[cls] トークンからクラス分類
"""
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.drone_classes import NUM_KEYPOINTS
from ..interfaces.exceptions import ShapeError
from .model_config import ModelConfig


@dataclass
class TokenSet:
    """パッチトークン X^(0)（位置符号化済み）と [cls] トークン"""

    tokens: torch.Tensor      # (B, M, d)
    cls_token: torch.Tensor   # (B, 1, d)
    grid: Tuple[int, int]


@dataclass
class EncoderState:
    """各層の出力・中間表現・コンパクト表現・ゲート重み"""

    layer_tokens: List[torch.Tensor] = field(default_factory=list)   # (B, M, d) × N
    layer_cls: List[torch.Tensor] = field(default_factory=list)      # (B, d) × N
    x_ir: List[torch.Tensor] = field(default_factory=list)           # (B, d) × N
    x_cr: List[torch.Tensor] = field(default_factory=list)           # (B, 4, 2) × N
    attention: List[torch.Tensor] = field(default_factory=list)      # (B, heads, M+1, M+1) × N
    w_gate: torch.Tensor = None                                      # (B, N)


@dataclass
class EncoderOutput:
    y2d: torch.Tensor            # (B, 4, 2) ピクセル
    class_dist: torch.Tensor     # (B, C)
    class_logits: torch.Tensor   # (B, C)
    cls_token: torch.Tensor      # (B, d)
    state: EncoderState = None


def sinusoidal_encoding(length: int, dim: int) -> torch.Tensor:
    """固定の正弦波位置符号化 (length, dim)"""
    position = torch.arange(length, dtype=torch.float64)[:, None]
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    encoding = torch.zeros(length, dim, dtype=torch.float64)
    encoding[:, 0::2] = torch.sin(position * div)
    encoding[:, 1::2] = torch.cos(position * div)[:, : dim // 2]
    return encoding.float()


class ConvBackbone(nn.Module):
    """ストライド合計16の小さな畳み込みスタック（スクラッチ学習）"""

    def __init__(self, out_channels: int):
        super().__init__()
        channels = [3, 16, 32, 64, out_channels]
        blocks = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            blocks += [
                nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1),
                nn.GroupNorm(min(8, c_out), c_out),
                nn.ReLU(inplace=True),
            ]
        self.blocks = nn.Sequential(*blocks)

    def forward(self, x):
        return self.blocks(x)


class SelfAttentionBlock(nn.Module):
    """Pre-norm の自己注意ブロック（Q = K = V = 入力列）"""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: int = 2):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * mlp_ratio),
            nn.GELU(),
            nn.Linear(dim * mlp_ratio, dim),
        )

    def forward(self, x):
        h = self.norm1(x)
        attended, weights = self.attn(h, h, h, need_weights=True, average_attn_weights=False)
        x = x + attended
        x = x + self.mlp(self.norm2(x))
        return x, weights


class KeypointEncoder(nn.Module):
    """2D キーポイントとドローンクラスを同時に推定するエンコーダ"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.backbone = ConvBackbone(d)
        self.patch_embed = nn.Conv2d(d, d, kernel_size=config.patch_size, stride=config.patch_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, d))
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        self.register_buffer('pos_encoding', sinusoidal_encoding(config.num_tokens, d)[None], persistent=False)
        self.layers = nn.ModuleList(
            SelfAttentionBlock(d, config.num_heads, config.mlp_ratio) for _ in range(config.num_layers)
        )
        # W: d → 4x2。出力は画像解像度で拡大したピクセル座標（W' = diag(scale)·W も線形写像）
        self.keypoint_proj = nn.Linear(d, NUM_KEYPOINTS * 2)
        nn.init.constant_(self.keypoint_proj.bias, 0.5)
        self.register_buffer(
            'keypoint_scale',
            torch.tensor([float(config.resolution[0]), float(config.resolution[1])]),
            persistent=False,
        )
        self.gate_proj = nn.Linear(d, config.num_layers, bias=False)   # W_g
        self.cls_head = nn.Linear(d, config.num_classes)               # W_cls

    def tokenize(self, images: torch.Tensor) -> TokenSet:
        """
        画像をトークン列に変換

        Args:
            images: (B, 3, H, W)、値域 [0, 1]

        Returns:
            M 個の d 次元トークンと [cls] トークン
        """
        width, height = self.config.resolution
        if images.dim() != 4 or images.shape[1] != 3 or tuple(images.shape[-2:]) != (height, width):
            raise ShapeError(f"入力画像の形状が不正です: {tuple(images.shape)} (期待: (B, 3, {height}, {width}))")
        features = self.patch_embed(self.backbone(images))
        grid = tuple(features.shape[-2:])
        tokens = features.flatten(2).transpose(1, 2)
        if self.config.use_positional_encoding:
            # 位置符号化はパッチトークンのみに加算する
            tokens = tokens + self.pos_encoding.to(tokens.dtype)
        cls_token = self.cls_token.expand(tokens.shape[0], -1, -1)
        return TokenSet(tokens=tokens, cls_token=cls_token, grid=grid)

    def encode(self, tokens: TokenSet) -> EncoderState:
        """N 層の自己注意を適用し、層ごとの中間表現・コンパクト表現を求める"""
        state = EncoderState()
        x = torch.cat([tokens.cls_token, tokens.tokens], dim=1)
        batch = x.shape[0]
        for layer in self.layers:
            x, weights = layer(x)
            patch_tokens = x[:, 1:, :]
            x_ir = patch_tokens.max(dim=1).values
            state.layer_tokens.append(patch_tokens)
            state.layer_cls.append(x[:, 0, :])
            state.x_ir.append(x_ir)
            state.x_cr.append(self.compact_representation(x_ir).view(batch, NUM_KEYPOINTS, 2))
            state.attention.append(weights)
        state.w_gate = self.gate_weights(state.x_ir[-1])
        return state

    def compact_representation(self, x_ir: torch.Tensor) -> torch.Tensor:
        scale = self.keypoint_scale.to(x_ir.dtype).repeat(NUM_KEYPOINTS)
        return self.keypoint_proj(x_ir) * scale

    def gate_weights(self, x_ir_final: torch.Tensor) -> torch.Tensor:
        """softmax(W_g · X_IR^(N))"""
        return F.softmax(self.gate_proj(x_ir_final), dim=-1)

    @staticmethod
    def predict_keypoints(state: EncoderState) -> torch.Tensor:
        """ReLU(Σ_l w_gate^(l) · X_CR^(l))"""
        stacked = torch.stack(state.x_cr, dim=1)                 # (B, N, 4, 2)
        weighted = (state.w_gate[:, :, None, None] * stacked).sum(dim=1)
        return F.relu(weighted)

    def class_logits(self, x_cls_final: torch.Tensor) -> torch.Tensor:
        return self.cls_head(x_cls_final)

    def classify(self, x_cls_final: torch.Tensor) -> torch.Tensor:
        """softmax(W_cls · x_cls^(N))"""
        return F.softmax(self.class_logits(x_cls_final), dim=-1)

    def forward(self, images: torch.Tensor) -> EncoderOutput:
        state = self.encode(self.tokenize(images))
        cls_final = state.layer_cls[-1]
        logits = self.class_logits(cls_final)
        return EncoderOutput(
            y2d=self.predict_keypoints(state),
            class_dist=F.softmax(logits, dim=-1),
            class_logits=logits,
            cls_token=cls_final,
            state=state,
        )
