"""
損失関数と損失重み付け戦略
L_enc = L_2D + L_cls、L_dec = L_3D + L_rot + L_trans
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import torch
import torch.nn.functional as F

from ..interfaces.exceptions import ConfigurationError, ShapeError

PROBABILITY_FLOOR = 1e-12
STRATEGY_KINDS = ('equal', 'tanh-weighted', 'smoothly-shifted', '3d-biased')


def _scalar(value: torch.Tensor) -> float:
    return float(value.detach().item())


def _check_shapes(pred: torch.Tensor, gt: torch.Tensor, name: str):
    if pred.shape != gt.shape:
        raise ShapeError(f"{name}: 形状が一致しません {tuple(pred.shape)} と {tuple(gt.shape)}")


def loss_2d(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    _check_shapes(pred, gt, 'loss_2d')
    return F.mse_loss(pred, gt)


def loss_3d(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    _check_shapes(pred, gt, 'loss_3d')
    return F.mse_loss(pred, gt)


def loss_trans(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    _check_shapes(pred, gt, 'loss_trans')
    return F.mse_loss(pred, gt)


def loss_cls(dist: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """
    クロスエントロピー −log(dist[label])（バッチ平均）

    Args:
        dist: クラス確率 (C,) または (B, C)
        label: クラス番号（スカラーまたは (B,)）
    """
    if dist.dim() == 1:
        dist = dist.unsqueeze(0)
    label = torch.as_tensor(label, device=dist.device).long().reshape(-1)
    if label.shape[0] != dist.shape[0]:
        raise ShapeError(f"loss_cls: バッチ数が一致しません {dist.shape[0]} と {label.shape[0]}")
    if torch.any(label < 0) or torch.any(label >= dist.shape[-1]):
        raise ConfigurationError(f"クラス番号が範囲外です: {label.tolist()} (クラス数 {dist.shape[-1]})")
    picked = dist.gather(1, label[:, None]).squeeze(1)
    return -torch.log(picked.clamp_min(PROBABILITY_FLOOR)).mean()


def loss_rot_circular(r_pred: torch.Tensor, r_gt: torch.Tensor) -> torch.Tensor:
    """
    単位円上の最短距離による回転損失
    (1/3)·Σ_j min(|Δ_j|, 1−|Δ_j|)²（バッチ平均）
    """
    _check_shapes(r_pred, r_gt, 'loss_rot_circular')
    delta = torch.remainder(r_pred - r_gt, 1.0)
    wrapped = torch.minimum(delta, 1.0 - delta)
    return (wrapped ** 2).mean()


@dataclass
class LossBreakdown:
    l_2d: torch.Tensor
    l_cls: torch.Tensor
    l_3d: torch.Tensor
    l_rot: torch.Tensor
    l_trans: torch.Tensor

    @property
    def l_enc(self) -> torch.Tensor:
        return self.l_2d + self.l_cls

    @property
    def l_dec(self) -> torch.Tensor:
        return self.l_3d + self.l_rot + self.l_trans

    def as_floats(self, l_total: Optional[torch.Tensor] = None) -> Dict[str, float]:
        values = {
            name: _scalar(getattr(self, name))
            for name in ('l_2d', 'l_cls', 'l_3d', 'l_rot', 'l_trans', 'l_enc', 'l_dec')
        }
        values['l_total'] = _scalar(l_total) if l_total is not None else values['l_enc'] + values['l_dec']
        return values


@dataclass
class WeightingStrategy:
    """
    エンコーダ損失とデコーダ損失の重み付け

    tanh-weighted と smoothly-shifted の形状は解釈に基づく:
        p = epoch / (total_epochs - 1)
        tanh-weighted:    w_dec = (1 + tanh(tanh_steepness·(p − midpoint))) / 2
        smoothly-shifted: w_dec = sigmoid(smooth_steepness·(p − midpoint)) を両端で 0, 1 になるよう正規化
        w_enc = 1 − w_dec
    """

    kind: str = 'equal'
    tanh_steepness: float = 10.0
    smooth_steepness: float = 6.0
    midpoint: float = 0.5
    decoder_bias: float = 5.0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigurationError(f"サポートされていない損失重み付け: {self.kind} (候補: {', '.join(STRATEGY_KINDS)})")

    def weights(self, epoch: int, total_epochs: int) -> Tuple[float, float]:
        """(w_enc, w_dec)"""
        if self.kind == 'equal':
            return 1.0, 1.0
        if self.kind == '3d-biased':
            return 1.0, self.decoder_bias
        progress = epoch / (total_epochs - 1) if total_epochs > 1 else 1.0
        progress = min(max(progress, 0.0), 1.0)
        if self.kind == 'tanh-weighted':
            w_dec = 0.5 * (1.0 + math.tanh(self.tanh_steepness * (progress - self.midpoint)))
        else:
            def sigmoid(p):
                return 1.0 / (1.0 + math.exp(-self.smooth_steepness * (p - self.midpoint)))
            low, high = sigmoid(0.0), sigmoid(1.0)
            w_dec = (sigmoid(progress) - low) / (high - low)
        return 1.0 - w_dec, w_dec


def combine_losses(breakdown: LossBreakdown, strategy: WeightingStrategy,
                   epoch: int, total_epochs: int) -> torch.Tensor:
    w_enc, w_dec = strategy.weights(epoch, total_epochs)
    if strategy.kind == 'equal':
        return breakdown.l_2d + breakdown.l_cls + breakdown.l_3d + breakdown.l_rot + breakdown.l_trans
    return w_enc * breakdown.l_enc + w_dec * breakdown.l_dec
